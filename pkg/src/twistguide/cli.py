"""Command-line front end: ``run``, ``report`` and ``export-mesh``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cross_section import (
    build_domain,
    check_rotational_symmetry,
    compute_lambda,
    dirichlet_ground_pair,
    lambda_refinement,
)
from .curve_geometry import (
    check_injectivity,
    frame_increment_check,
    frame_table,
    integrate_frame,
    straight_profile,
    tube_surface_mesh,
    write_obj,
)
from .errors import HardyUnavailableError, TwistGuideError
from .hardy_constants import (
    ConstantsLedger,
    birman_inequality_check,
    classical_hardy_ratio,
    decompose_sigma,
    optimize_hardy_bound,
    restricted_l_sigma,
    sharp_local_coefficient,
    verify_hardy,
    verify_local_hardy,
)
from .scenario import Scenario, load_scenario
from .stability_thresholds import (
    bend_sweep,
    constants_ledger,
    epsilon_threshold,
    shape_strength,
)
from .waveguide_operators import (
    assemble_l_sigma,
    assemble_q,
    eigenvalues_below_threshold,
    make_tube_grid,
    transverse_basis,
)

OUT_ENV = "TWISTGUIDE_OUT"
MANIFEST = "manifest.json"
# lambda below this fraction of E1 is treated as zero
LAMBDA_REL_ZERO = 1e-5
SYMMETRY_ANGLES = tuple(2 * math.pi * k / 12 for k in range(1, 12)) + (1.0,)


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------

def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header, rows) -> None:
    """CSV with a header row and shortest round-trip float formatting."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(x) for x in r])


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


@dataclass
class RunContext:
    scenario: Scenario
    out: Path
    seed: int
    artifacts: list[str] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    checks: list[dict] = field(default_factory=list)
    constants: ConstantsLedger = field(default_factory=ConstantsLedger)
    notes: list[str] = field(default_factory=list)

    def csv(self, name, header, rows) -> None:
        write_csv(self.out / name, header, rows)
        self.artifacts.append(name)

    def check(self, name, passed, margin=None, detail="") -> None:
        self.checks.append({"name": name, "passed": bool(passed), "margin": margin, "detail": detail})


def _domain(sc: Scenario, delta=None):
    return build_domain(sc.cross_section.build(), sc.delta if delta is None else delta,
                        boundary=sc.boundary)


def _sigma_function(sc: Scenario, profile=None):
    """Twisting function: explicit ``sigma`` bumps, else ``theta' - kappa2`` of the profile."""
    if sc.sigma:
        bumps = [b.build() for b in sc.sigma]
        lo = min(b.support[0] for b in bumps)
        hi = max(b.support[1] for b in bumps)

        def sig(s):
            s = np.asarray(s, dtype=float)
            return sum(b.derivatives(s)[0] for b in bumps)

        def dsig(s):
            s = np.asarray(s, dtype=float)
            return sum(b.derivatives(s)[1] for b in bumps)

        return sig, dsig, (lo, hi)
    prof = sc.profile.build() if profile is None else profile
    if sc.mode == "bend_torsion":
        return prof.dtheta, prof.ddtheta, prof.support

    def dkappa2(s):
        s = np.asarray(s, dtype=float)
        return sum((b.derivatives(s)[1] for b in prof.kappa2_bumps), np.zeros_like(s))

    return (lambda s: -prof.rho(s), lambda s: prof.ddtheta(s) - dkappa2(s), prof.support)


def _hardy_setup(ctx: RunContext, dom, sig, dsig, support):
    """Lambda, availability decision and (when available) the optimised bound."""
    sc = ctx.scenario
    gp = dirichlet_ground_pair(dom)
    lam = compute_lambda(dom, gp).lam
    sym = check_rotational_symmetry(sc.cross_section.build(), SYMMETRY_ANGLES)
    ctx.summary.update(E1=gp.E1, lambda_=lam, rotationally_invariant=sym.is_symmetric_for_all_alpha)
    if lam <= LAMBDA_REL_ZERO * gp.E1 or sym.is_symmetric_for_all_alpha:
        ctx.summary["hardy_available"] = False
        ctx.notes.append("lambda ~ 0 -> Hardy machinery unavailable (circular cross-section)")
        return gp, lam, None
    dec = decompose_sigma(sig, support, ds=min(1e-3, sc.ds / 10), dsigma=dsig)
    hb = optimize_hardy_bound(dec, dom.radius, lam, sc.s0)
    ctx.constants.extend(hb.ledger)
    ctx.summary.update(hardy_available=True, c_h_bound=hb.c_h, c_h_min_sigma_variant=hb.c_h_min_sigma,
                       alpha=hb.alpha, b=hb.b, c0=hb.c0, beta=hb.beta,
                       window=list(dec.components[dec.component_of(sc.s0)].interval))
    return gp, lam, (dec, hb)


# --------------------------------------------------------------------------
# tasks
# --------------------------------------------------------------------------

def task_ground_pair(ctx: RunContext) -> None:
    sc = ctx.scenario
    rows = []
    for d in (sc.deltas or [sc.delta]):
        dom = _domain(sc, d)
        gp = dirichlet_ground_pair(dom)
        rows.append([d, dom.n, gp.E1, gp.E2, gp.gap])
    ctx.csv("ground_pair.csv", ["delta", "nodes", "E1", "E2", "gap"], rows)
    ctx.csv("ground_vector.csv", ["t2", "t3", "value"],
            [[p[0], p[1], v] for p, v in zip(dom.points, gp.J1)])
    ctx.summary.update(E1=gp.E1, E2=gp.E2, degenerate=gp.degenerate, delta=rows[-1][0])


def task_lambda(ctx: RunContext) -> None:
    sc = ctx.scenario
    shape = sc.cross_section.build()
    res = lambda_refinement(shape, sc.deltas or [sc.delta], boundary=sc.boundary)
    rows, prev = [], None
    for d, lam in res.history:
        rows.append([d, lam, None if prev is None else prev / lam])
        prev = lam
    ctx.csv("lambda.csv", ["delta", "lambda", "ratio_to_previous"], rows)
    dom = _domain(sc, res.history[-1][0])
    ctx.csv("lambda_vector.csv", ["t2", "t3", "value"],
            [[p[0], p[1], v] for p, v in zip(dom.points, res.vector)])
    sym = check_rotational_symmetry(shape, SYMMETRY_ANGLES)
    E1 = dirichlet_ground_pair(dom).E1
    ctx.summary.update(lambda_=res.lam, E1=E1, rotationally_invariant=sym.is_symmetric_for_all_alpha,
                       witness_angle=sym.witness_alpha)
    if res.lam <= LAMBDA_REL_ZERO * E1 or sym.is_symmetric_for_all_alpha:
        ctx.notes.append("lambda ~ 0 -> Hardy machinery unavailable (circular cross-section)")


def _tube_form(sc: Scenario, grid, profile):
    if not sc.profile.empty:
        inj = check_injectivity(profile, grid.domain.radius)
        warn = None if inj.status == "PASS" else f"injectivity {inj.status}"
        return assemble_q(grid, profile, warn)
    if sc.sigma:
        sig, _, _ = _sigma_function(sc)
        return assemble_l_sigma(grid, sig)
    return assemble_l_sigma(grid, lambda s: np.zeros_like(np.asarray(s, dtype=float)))


def _support(sc: Scenario, profile):
    if not sc.profile.empty:
        return profile.support
    if sc.sigma:
        return _sigma_function(sc)[2]
    return None


def task_spectrum(ctx: RunContext) -> None:
    sc = ctx.scenario
    dom = _domain(sc)
    basis = transverse_basis(dom, sc.modes)
    profile = None if sc.profile.empty else sc.profile.build()
    eig_rows, trunc_rows = [], []
    for L in sc.truncations:
        grid = make_tube_grid(dom, L, sc.ds, ends=sc.ends, basis=basis, support=_support(sc, profile))
        res = eigenvalues_below_threshold(_tube_form(sc, grid, profile), k=sc.n_eigen)
        for i, (v, r) in enumerate(zip(res.values, res.residuals)):
            eig_rows.append([L, i, v, res.E1, res.E1 - v, r])
        trunc_rows.append([L, res.count, res.lowest, res.E1])
    ctx.csv("spectrum.csv", ["L", "index", "eigenvalue", "E1", "binding", "residual"], eig_rows)
    ctx.csv("truncation.csv", ["L", "count_below_E1", "lowest", "E1"], trunc_rows)
    counts = [r[1] for r in trunc_rows]
    lows = [r[2] for r in trunc_rows]
    stable = len(lows) < 2 or abs(lows[-1] - lows[-2]) < 1e-5
    ctx.summary.update(E1=basis.E1, counts=counts, lowest=lows, L_values=sc.truncations,
                       modes=basis.m, ends=sc.ends)
    if len(lows) >= 2:
        ctx.check("truncation stability |dmu| < 1e-5", stable, abs(lows[-1] - lows[-2]))


def task_hardy(ctx: RunContext) -> None:
    sc = ctx.scenario
    dom = _domain(sc)
    sig, dsig, support = _sigma_function(sc)
    gp, lam, hardy = _hardy_setup(ctx, dom, sig, dsig, support)
    bound = hardy[1].c_h if hardy else None
    basis = transverse_basis(dom, sc.modes)
    rows, mus = [], []
    grid = None
    for L in sc.truncations:
        grid = make_tube_grid(dom, L, sc.ds, ends=sc.ends, basis=basis, support=support)
        v = verify_hardy(assemble_l_sigma(grid, sig, sign=1), sc.s0, bound)
        rows.append([L, v.mu, v.residual, bound, v.passes, v.sharpness])
        mus.append(v.mu)
    ctx.csv("hardy.csv", ["L", "mu", "residual", "c_h_bound", "passes", "mu_over_bound"], rows)
    ctx.summary.update(mu=mus, L_values=sc.truncations, ends=sc.ends, modes=basis.m)
    if len(mus) >= 2:
        change = abs(mus[-1] - mus[0]) / max(abs(mus[0]), 1e-300)
        ctx.summary["relative_change"] = change
    if hardy is None:
        ctx.check("mu* <= 0.01 E1 (no Hardy inequality)", mus[-1] <= 0.01 * gp.E1,
                  0.01 * gp.E1 - mus[-1])
    else:
        dec, hb = hardy
        ctx.check("mu* > 0", mus[-1] > 0, mus[-1])
        ctx.check("mu* >= c_h bound", mus[-1] >= hb.c_h - 1e-8, mus[-1] - hb.c_h)
        j = dec.component_of(sc.s0)
        window = dec.components[j].interval
        fw = restricted_l_sigma(grid, sig, window)
        loc = verify_local_hardy(fw, sig, window, hb.c0, lam, trials=sc.trials, seed=ctx.seed)
        sharp = sharp_local_coefficient(fw, sig, window, lam)
        ctx.constants.add("a_j sharp (discrete)", sharp["sharp"],
                          "largest a with LHS >= a lambda int|sigma psi|^2 on the window")
        ctx.check("local Hardy inequality (random trials)", loc["holds"], loc["min_relative_margin"])
        ctx.check("a_j <= sharp discrete coefficient", hb.c0 <= sharp["sharp"],
                  sharp["sharp"] - hb.c0)
    ctx.csv("constants.csv", ["name", "value", "formula", "inputs", "note"], ctx.constants.rows())


def task_sweep(ctx: RunContext) -> None:
    sc = ctx.scenario
    dom = _domain(sc)
    prof = sc.profile.build()
    sig, dsig, support = _sigma_function(sc, prof)
    basis = transverse_basis(dom, sc.modes)
    eps = None
    try:
        _, lam, hardy = _hardy_setup(ctx, dom, sig, dsig, support)
    except HardyUnavailableError as exc:
        ctx.notes.append(f"no threshold: {exc}")
        hardy = None
    if hardy is not None:
        hb = hardy[1]
        n = prof.norms
        if sc.mode == "bend":
            led = constants_ledger("bend", dom.radius, n["rho"], n["dtheta"])
        else:
            led = constants_ledger("bend_torsion", dom.radius, n["kappa2"], n["dtheta"], cap=True)
        k0, n1 = shape_strength(prof, sc.mode)
        eps = epsilon_threshold(led, hb.c_h, basis.E1, prof.support, sc.s0, kappa1_fraction=n1 / k0)
        ctx.constants.extend(led.to_constants_ledger())
        ctx.summary["epsilon"] = eps
    ks = sorted(set(sc.k_values) | ({eps} if eps is not None else set()))
    res = bend_sweep(dom, prof, ks, L_values=sc.truncations, ds=sc.ds, mode=sc.mode, basis=basis,
                     ends=sc.ends, epsilon=eps)
    ctx.csv("sweep.csv", ["k", "L", "count_below_E1", "lowest", "E1", "binding", "k_le_epsilon",
                          "injectivity", "residual"],
            [[r.k, r.L, r.count, r.lowest, r.E1, r.E1 - r.lowest if r.count else 0.0, r.below_eps,
              r.injectivity, r.residual] for r in res.rows])
    ctx.csv("constants.csv", ["name", "value", "formula", "inputs", "note"], ctx.constants.rows())
    ctx.summary.update(k_c=res.k_c, monotone_onset=res.monotone, kappa1_dot_ratio=res.kappa1_ratio,
                       mode=sc.mode, bound_state_at_every_k=all(r.count > 0 for r in res.rows if r.k > 0))
    if eps is not None:
        ctx.check("no eigenvalue below E1 for k <= epsilon", res.conservative)
        ctx.check("onset k_c >= epsilon", res.k_c is None or res.k_c >= eps,
                  None if res.k_c is None else res.k_c - eps)
    ctx.check("monotone onset", res.monotone)


def task_injectivity(ctx: RunContext) -> None:
    sc = ctx.scenario
    shape = sc.cross_section.build()
    prof = sc.profile.build()
    a = shape.radius()
    rep = check_injectivity(prof, a, scan=True, shape=shape)
    frame = integrate_frame(prof)
    inc = frame_increment_check(frame, seed=ctx.seed)
    header, table = frame_table(frame)
    ctx.csv("frame.csv", header, table.tolist())
    ctx.csv("injectivity.csv", ["quantity", "value"],
            [["a", a], ["a_kappa1", rep.a_kappa1], ["criterion_value", rep.criterion_value],
             ["status", rep.status], ["scan_min_distance", rep.scan_min_distance],
             ["scan_spacing", rep.scan_spacing], ["scan_overlap", rep.scan_overlap],
             ["gram_defect", frame.gram_defect]])
    ctx.summary.update(status=rep.status, criterion_value=rep.criterion_value,
                       a_kappa1=rep.a_kappa1, scan_overlap=rep.scan_overlap,
                       gram_defect=frame.gram_defect)
    ctx.check("immersion a|kappa1| < 1", rep.immersion_ok, 1 - rep.a_kappa1)
    ctx.check("no overlap in the distance scan", not rep.scan_overlap)
    ctx.check("frame increment bound", inc["holds"], inc.get("min_margin"))


def task_constants(ctx: RunContext) -> None:
    sc = ctx.scenario
    dom = _domain(sc)
    sig, dsig, support = _sigma_function(sc)
    _, lam, hardy = _hardy_setup(ctx, dom, sig, dsig, support)
    if hardy is not None:
        dec, hb = hardy
        comp = dec.components[dec.component_of(sc.s0)]
        bc = birman_inequality_check(comp.interval, comp.sub, trials=sc.trials, seed=ctx.seed)
        ctx.check("interval inequality: max ratio <= c(B,A')", bc["max_ratio"] <= bc["bound"],
                  bc["margin"])
    ratio = classical_hardy_ratio()
    ctx.check("1-D Hardy ratio <= 4", ratio <= 4.0, 4.0 - ratio)
    if not sc.profile.empty:
        prof = sc.profile.build()
        n = prof.norms
        if sc.mode == "bend":
            led = constants_ledger("bend", dom.radius, n["rho"], n["dtheta"])
        else:
            led = constants_ledger("bend_torsion", dom.radius, n["kappa2"], n["dtheta"], cap=True)
        if hardy is not None:
            k0, n1 = shape_strength(prof, sc.mode) if n["kappa1"] > 0 else (1.0, 1.0)
            eps = epsilon_threshold(led, hardy[1].c_h, dirichlet_ground_pair(dom).E1,
                                    prof.support, sc.s0, kappa1_fraction=n1 / k0)
            ctx.summary["epsilon"] = eps
        ctx.constants.extend(led.to_constants_ledger())
    ctx.csv("constants.csv", ["name", "value", "formula", "inputs", "note"], ctx.constants.rows())


TASK_FUNCS = {
    "ground_pair": task_ground_pair,
    "lambda": task_lambda,
    "spectrum": task_spectrum,
    "hardy": task_hardy,
    "sweep": task_sweep,
    "injectivity": task_injectivity,
    "constants": task_constants,
}


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def resolve_out(sc: Scenario, out: str | None) -> Path:
    if out:
        return Path(out)
    if sc.output_dir:
        return Path(sc.output_dir)
    return Path(os.environ.get(OUT_ENV, "twistguide_out")) / sc.name


def run_scenario(sc: Scenario, out: Path, seed: int = 0, threads: int | None = 1) -> dict:
    """Execute a scenario, write its artifacts and manifest, return the manifest."""
    from threadpoolctl import threadpool_limits

    out.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(scenario=sc, out=out, seed=seed)
    (out / "scenario.json").write_text(
        json.dumps(sc.model_dump(mode="json"), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    ctx.artifacts.append("scenario.json")
    with threadpool_limits(limits=threads):
        TASK_FUNCS[sc.task](ctx)
    manifest = {
        "tool": "twistguide",
        "version": __version__,
        "scenario": sc.name,
        "task": sc.task,
        "scenario_hash": sc.hash(),
        "seed": seed,
        "artifacts": [{"path": p, "sha256": _sha256(out / p), "bytes": (out / p).stat().st_size}
                      for p in ctx.artifacts],
        "summary": _jsonable(ctx.summary),
        "checks": _jsonable(ctx.checks),
        "constants": _jsonable([{"name": e.name, "value": e.value, "formula": e.formula,
                                 "inputs": e.inputs, "note": e.note} for e in ctx.constants.entries]),
        "notes": ctx.notes,
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def format_report(manifest: dict, base: Path | None = None) -> str:
    """Human-readable summary of a manifest: constants, checks and artifact integrity."""
    lines = [f"scenario {manifest['scenario']} (task {manifest['task']}, hash {manifest['scenario_hash'][:16]})"]
    summ = manifest.get("summary", {})
    for k in sorted(summ):
        lines.append(f"  {k.rstrip('_')} = {_fmt(summ[k])}")
    if manifest["task"] == "hardy":
        mu = summ.get("mu")
        if mu:
            lines.append(f"mu* = {_fmt(mu[-1])}")
        if summ.get("hardy_available"):
            lines.append(f"c_h bound = {_fmt(summ['c_h_bound'])}")
            ok = mu and mu[-1] >= summ["c_h_bound"] - 1e-8
            lines.append(("PASS" if ok else "FAIL") + " mu* >= bound")
    if manifest["task"] == "injectivity":
        lines.append(f"Injectivity criterion: {summ.get('status')} "
                     f"(max(4|I|^2|k1|^2, 4a(|k1|+|k2|)) = {_fmt(summ.get('criterion_value'))})")
    for note in manifest.get("notes", []):
        lines.append(note)
    if manifest.get("constants"):
        lines.append("constants:")
        for c in manifest["constants"]:
            lines.append(f"  {c['name']} = {_fmt(c['value'])}    [{c['formula']}]"
                         + (f"  ({c['note']})" if c.get("note") else ""))
    if manifest.get("checks"):
        lines.append("checks:")
        for c in manifest["checks"]:
            margin = "" if c.get("margin") is None else f"  margin {_fmt(c['margin'])}"
            lines.append(f"  {'PASS' if c['passed'] else 'FAIL'} {c['name']}{margin}")
    if base is not None:
        bad = [a["path"] for a in manifest["artifacts"]
               if not (base / a["path"]).exists() or _sha256(base / a["path"]) != a["sha256"]]
        lines.append("artifacts: " + (f"{len(manifest['artifacts'])} verified" if not bad
                                      else "HASH MISMATCH " + ", ".join(bad)))
    return "\n".join(lines)


def export_mesh(sc: Scenario, out: Path, n_boundary: int = 64, ds: float | None = None) -> Path:
    """Swept boundary surface of the tube over ``[-L, L]`` as Wavefront OBJ."""
    shape = sc.cross_section.build()
    prof = straight_profile() if sc.profile.empty else sc.profile.build()
    frame = integrate_frame(prof, extend=(-sc.L, sc.L))
    step = sc.ds if ds is None else ds
    n = max(1, int(round(2 * sc.L / step)))
    verts, faces = tube_surface_mesh(frame, shape, np.linspace(-sc.L, sc.L, n + 1), n_boundary)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{sc.name}.obj"
    write_obj(path, verts, faces)
    return path


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twistguide", description="Bent and twisted tube spectral experiments")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario config")
    r.add_argument("config", type=Path)
    r.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV}/<name>)")
    r.add_argument("--threads", type=int, default=1, help="BLAS/LAPACK threads")
    r.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    rep = sub.add_parser("report", help="summarize a manifest")
    rep.add_argument("manifest", type=Path)
    m = sub.add_parser("export-mesh", help="write the tube surface as OBJ")
    m.add_argument("config", type=Path)
    m.add_argument("--out", default=None)
    m.add_argument("--n-boundary", type=int, default=64)
    m.add_argument("--ds", type=float, default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            sc = load_scenario(args.config)
            out = resolve_out(sc, args.out)
            manifest = run_scenario(sc, out, seed=args.seed, threads=args.threads)
            print(format_report(manifest))
            print(f"manifest: {out / MANIFEST}")
            return 0 if all(c["passed"] for c in manifest["checks"]) else 1
        if args.command == "report":
            manifest = json.loads(args.manifest.read_text(encoding="utf-8"))
            print(format_report(manifest, args.manifest.parent))
            return 0
        sc = load_scenario(args.config)
        path = export_mesh(sc, resolve_out(sc, args.out), args.n_boundary, args.ds)
        print(path)
        return 0
    except (TwistGuideError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
