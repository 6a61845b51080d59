"""Explicit constants of the Hardy inequality for twisted tubes, and numerical checks.

The chain is: Birman-type constant ``c(Lambda, Lambda')`` -> mixed-term bound
``gamma_{alpha,beta}`` -> local coefficients ``a_j`` -> global lower bound for
``c_h``.  Every constant is recorded in a :class:`ConstantsLedger` together
with its formula and inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .cross_section import CrossSectionDomain, angular_derivative_matrix, stiffness_matrix
from .errors import HardyUnavailableError
from .waveguide_operators import SymmetricForm, TruncatedTubeGrid, _assemble, weighted_ground_value

LEVELS = (0.25, 0.5, 0.75)
_LAMBDA_FLOOR = 1e-6


# --------------------------------------------------------------------------
# ledger
# --------------------------------------------------------------------------

@dataclass
class LedgerEntry:
    name: str
    value: float
    formula: str
    inputs: dict = field(default_factory=dict)
    note: str = ""


@dataclass
class ConstantsLedger:
    entries: list[LedgerEntry] = field(default_factory=list)

    def add(self, name, value, formula, note="", **inputs) -> float:
        self.entries.append(LedgerEntry(name, float(value), formula, dict(inputs), note))
        return float(value)

    def __getitem__(self, name) -> float:
        for e in reversed(self.entries):
            if e.name == name:
                return e.value
        raise KeyError(name)

    def __contains__(self, name) -> bool:
        return any(e.name == name for e in self.entries)

    def rows(self) -> list[list]:
        out = []
        for e in self.entries:
            inputs = ";".join(f"{k}={_fmt(v)}" for k, v in e.inputs.items())
            out.append([e.name, e.value, e.formula, inputs, e.note])
        return out

    def extend(self, other: "ConstantsLedger") -> None:
        self.entries.extend(other.entries)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return "(" + ",".join(_fmt(x) for x in v) + ")"
    return str(v)


# --------------------------------------------------------------------------
# Birman-type inequality on an interval
# --------------------------------------------------------------------------

def birman_constant(length: float, sub_length: float) -> float:
    """``max(2 + 16 (|L|/|L'|)^2, 4 |L|^2)`` for ``L' subset L``."""
    if not sub_length > 0:
        raise ValueError("the subinterval must have positive length")
    if sub_length > length * (1 + 1e-12):
        raise ValueError("the subinterval must be contained in the interval")
    return max(2.0 + 16.0 * (length / sub_length) ** 2, 4.0 * length ** 2)


def _interval_length(iv) -> float:
    return float(iv[1] - iv[0])


def birman_ratio(x: np.ndarray, f: np.ndarray, sub: tuple[float, float]) -> float:
    """``|f|^2_L / (|f|^2_L' + |f'|^2_L)`` for samples of a piecewise-linear ``f``."""
    dx = np.diff(x)
    # exact integrals for the piecewise-linear interpolant
    fa, fb = f[:-1], f[1:]
    sq = dx * (fa * fa + fa * fb + fb * fb) / 3.0
    total = float(sq.sum())
    mid = 0.5 * (x[:-1] + x[1:])
    inside = (mid > sub[0]) & (mid < sub[1])
    sub_norm = float(sq[inside].sum())
    grad = float(np.sum((fb - fa) ** 2 / dx))
    return total / (sub_norm + grad)


def birman_inequality_check(interval: tuple[float, float], sub: tuple[float, float],
                            trials: int = 1000, seed: int = 0, n: int = 400) -> dict:
    """Largest ratio over random piecewise-linear and Fourier trial functions.

    ``sub`` endpoints are snapped to the sampling grid.  The exact maximum over
    all piecewise-linear functions on the grid is also returned.
    """
    lo, hi = interval
    x = np.linspace(lo, hi, n + 1)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(trials):
        if k % 2 == 0:
            knots = np.sort(rng.uniform(lo, hi, rng.integers(2, 12)))
            knots = np.concatenate([[lo], knots, [hi]])
            f = np.interp(x, knots, rng.normal(size=len(knots)))
        else:
            modes = rng.integers(1, 16)
            amp = rng.normal(size=modes) / (1 + np.arange(modes))
            ph = rng.uniform(0, 2 * np.pi, modes)
            f = sum(a * np.cos(np.pi * (j) * (x - lo) / (hi - lo) + p)
                    for j, (a, p) in enumerate(zip(amp, ph)))
        worst = max(worst, birman_ratio(x, np.asarray(f, dtype=float), sub))
    c = birman_constant(_interval_length(interval), _interval_length(sub))
    return {"max_ratio": worst, "bound": c, "margin": c - worst,
            "exact_max": birman_exact_max(interval, sub, n), "trials": trials}


def birman_exact_max(interval, sub, n: int = 400) -> float:
    """Maximum of the ratio over the P1 space on ``n`` cells (generalised eigenproblem)."""
    lo, hi = interval
    x = np.linspace(lo, hi, n + 1)
    h = x[1] - x[0]
    main = np.full(n + 1, 2.0)
    main[[0, -1]] = 1.0
    K = sp.diags([-np.ones(n), main, -np.ones(n)], [-1, 0, 1]) / h
    mloc = h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])

    def mass(mask):
        M = np.zeros((n + 1, n + 1))
        for i in np.flatnonzero(mask):
            M[i:i + 2, i:i + 2] += mloc
        return M

    mid = 0.5 * (x[:-1] + x[1:])
    M_all = mass(np.ones(n, dtype=bool))
    M_sub = mass((mid > sub[0]) & (mid < sub[1]))
    vals = sla.eigh(M_all, K.toarray() + M_sub, eigvals_only=True, subset_by_index=[n, n])
    return float(vals[0])


# --------------------------------------------------------------------------
# decomposition of sigma
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Component:
    interval: tuple[float, float]
    sup: float
    dsup: float
    sub: tuple[float, float]
    sigma0: float
    level: float
    birman: float


@dataclass(frozen=True, eq=False)
class SigmaDecomposition:
    s: np.ndarray
    sigma: np.ndarray
    dsigma: np.ndarray
    components: tuple[Component, ...]
    sup: float
    threshold: float

    @property
    def support_hull(self) -> tuple[float, float]:
        return (self.components[0].interval[0], self.components[-1].interval[1])

    @property
    def support_measure(self) -> float:
        return float(sum(_interval_length(c.interval) for c in self.components))

    def component_of(self, s0: float) -> int:
        for j, c in enumerate(self.components):
            if c.interval[0] <= s0 <= c.interval[1]:
                return j
        raise HardyUnavailableError(f"s0={s0:g} lies outside supp(sigma)")

    def union(self) -> Component:
        """The whole support viewed as a single set ``A`` (hull ``B``)."""
        return _component(self.s, self.sigma, self.dsigma,
                          [(c.interval) for c in self.components])


def _choose_sub(s, absig, mask, hull_len):
    """Level-set subinterval maximising ``sigma0^2 / c(B, A')``."""
    best = None
    peak = float(absig[mask].max())
    for c in LEVELS:
        level_mask = mask & (absig >= c * peak)
        idx = np.flatnonzero(level_mask)
        # connected run containing the peak
        k = int(np.flatnonzero(mask)[np.argmax(absig[mask])])
        lo = hi = k
        while lo - 1 >= 0 and level_mask[lo - 1]:
            lo -= 1
        while hi + 1 < len(s) and level_mask[hi + 1]:
            hi += 1
        if hi == lo or idx.size == 0:
            continue
        sub = (float(s[lo]), float(s[hi]))
        sigma0 = float(absig[lo:hi + 1].min())
        cb = birman_constant(hull_len, sub[1] - sub[0])
        score = sigma0 ** 2 / cb
        if best is None or score > best[0]:
            best = (score, sub, sigma0, c, cb)
    if best is None:
        raise HardyUnavailableError("sigma support too narrow for the sampling grid")
    return best[1:]


def _component(s, sigma, dsigma, intervals) -> Component:
    mask = np.zeros(len(s), dtype=bool)
    for lo, hi in intervals:
        mask |= (s >= lo) & (s <= hi)
    absig = np.abs(sigma)
    hull = (min(i[0] for i in intervals), max(i[1] for i in intervals))
    sub, sigma0, level, cb = _choose_sub(s, absig, mask, hull[1] - hull[0])
    return Component(interval=hull if len(intervals) == 1 else hull,
                     sup=float(absig[mask].max()), dsup=float(np.abs(dsigma[mask]).max()),
                     sub=sub, sigma0=sigma0, level=level, birman=cb)


def decompose_sigma(sigma: Callable, support: tuple[float, float], ds: float = 1e-3,
                    dsigma: Callable | None = None, threshold: float = 1e-12,
                    pad: float = 1.0) -> SigmaDecomposition:
    """Closures of the connected components of ``{|sigma| > threshold}``.

    ``support`` is a window containing ``supp(sigma)``; derivatives default to
    centred differences of the samples.
    """
    lo, hi = support
    n = int(math.ceil((hi - lo + 2 * pad) / ds))
    s = np.linspace(lo - pad, hi + pad, n + 1)
    sig = np.asarray(sigma(s), dtype=float)
    dsig = np.asarray(dsigma(s), dtype=float) if dsigma is not None else np.gradient(sig, s)
    on = np.abs(sig) > threshold
    if not on.any():
        raise HardyUnavailableError("sigma vanishes identically: no Hardy inequality")
    comps = []
    idx = np.flatnonzero(on)
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    for run in runs:
        a = max(run[0] - 1, 0)
        b = min(run[-1] + 1, len(s) - 1)
        comps.append(_component(s, sig, dsig, [(float(s[a]), float(s[b]))]))
    return SigmaDecomposition(s=s, sigma=sig, dsigma=dsig, components=tuple(comps),
                              sup=float(np.abs(sig).max()), threshold=threshold)


# --------------------------------------------------------------------------
# mixed term and local coefficients
# --------------------------------------------------------------------------

def mixed_term_constants(sup_A: float, dsup_A: float, sup: float, a: float, lam: float,
                         birman: float, sigma0: float, alpha: float, beta: float):
    """``(c1, c2, c3, gamma_tilde, gamma)`` of the mixed-term estimate."""
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")
    if not lam > 0:
        raise HardyUnavailableError("lambda = 0: Hardy machinery unavailable")
    c1 = sup_A ** 2 * a ** 2
    c2 = dsup_A ** 2 * a ** 2
    c3 = c2 * birman / (lam * sigma0 ** 2)
    gt = max(math.sqrt(c3) * sup, c3 / (2 * beta), c3 * lam * sigma0 ** 2 / alpha)
    return c1, c2, c3, gt, gt + 2 * c1 / alpha


def mixed_term_gamma(decomp: SigmaDecomposition, j: int | None, a: float, lam: float,
                     alpha: float, beta: float):
    """Mixed-term constants for ``A = A_j`` (or the whole support when ``j`` is None)."""
    comp = decomp.union() if j is None else decomp.components[j]
    return mixed_term_constants(comp.sup, comp.dsup, decomp.sup, a, lam, comp.birman,
                                comp.sigma0, alpha, beta)


def local_hardy_coefficient(sup_Aj: float, beta: float, gamma_bj: float) -> float:
    """``a_j = min(|sigma|_{A_j}^-2, (1 - beta)/gamma(beta, j)) / 2``."""
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    return 0.5 * min(1.0 / sup_Aj ** 2, (1.0 - beta) / gamma_bj)


def optimal_local_hardy(decomp: SigmaDecomposition, j: int, a: float, lam: float,
                        betas: Sequence[float] | None = None) -> dict:
    """Scan ``beta`` and return the largest ``a_j`` with its inputs."""
    betas = np.linspace(0.02, 0.98, 49) if betas is None else np.asarray(betas, dtype=float)
    comp = decomp.components[j]
    best = None
    for beta in betas:
        c1, c2, c3, gt, g = mixed_term_gamma(decomp, j, a, lam, 1.0, float(beta))
        gbj = max(0.5, g)
        aj = local_hardy_coefficient(comp.sup, float(beta), gbj)
        if best is None or aj > best["a_j"]:
            best = {"a_j": aj, "beta": float(beta), "gamma_bj": gbj, "c1": c1, "c2": c2,
                    "c3": c3, "gamma_tilde": gt, "gamma": g}
    return best


def global_hardy_bound(lam: float, gamma_alpha: float, alpha: float, b: float, c0: float,
                       min_sigma_J: float, power: int = 2) -> float:
    """Lower bound for ``c_h``.  ``power=1`` gives the variant with ``min|sigma|``."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if lam <= 0 or min_sigma_J <= 0:
        raise HardyUnavailableError("lambda = 0 or sigma vanishes on J")
    first = (16 + 2 * b * b) / (b * b * c0 * lam * min_sigma_J ** power)
    return 1.0 / (first + 16 * (gamma_alpha / (1 - alpha) + 1))


@dataclass
class HardyBound:
    c_h: float
    c_h_min_sigma: float
    alpha: float
    b: float
    s0: float
    c0: float
    gamma_alpha: float
    min_sigma_J: float
    beta: float
    ledger: ConstantsLedger


def optimize_hardy_bound(decomp: SigmaDecomposition, a: float, lam: float, s0: float,
                         alphas: Sequence[float] | None = None, n_b: int = 8,
                         betas: Sequence[float] | None = None) -> HardyBound:
    """Best ``c_h`` bound over ``alpha`` and windows ``J = [s0 - b, s0 + b]``.

    ``b`` runs over ``b_max / 2^k``, ``b_max`` being the largest half-width with
    ``|sigma| > 0`` on ``J``; ``c0`` is the optimal ``a_j`` of the component
    containing ``J``.
    """
    if lam < _LAMBDA_FLOOR:
        raise HardyUnavailableError(
            f"lambda = {lam:.3e}: circular cross-section, Hardy machinery unavailable")
    alphas = np.round(np.arange(0.1, 0.91, 0.1), 10) if alphas is None else alphas
    j = decomp.component_of(s0)
    comp = decomp.components[j]
    on = np.abs(decomp.sigma) > decomp.threshold
    k0 = int(np.argmin(np.abs(decomp.s - s0)))
    if not on[k0]:
        raise HardyUnavailableError(f"sigma(s0) = 0 at s0={s0:g}")
    lo = hi = k0
    while lo - 1 >= 0 and on[lo - 1]:
        lo -= 1
    while hi + 1 < len(on) and on[hi + 1]:
        hi += 1
    b_max = min(s0 - decomp.s[lo], decomp.s[hi] - s0)
    if b_max <= 0:
        raise HardyUnavailableError("no window around s0 on which sigma is nonzero")
    loc = optimal_local_hardy(decomp, j, a, lam, betas)
    c0 = loc["a_j"]
    ledger = ConstantsLedger()
    ledger.add("lambda", lam, "inf (|grad f|^2 - E1|f|^2 + |d_tau f|^2)/|f|^2")
    ledger.add("a", a, "sup |t| over omega")
    ledger.add("c(B,A')", comp.birman, "max(2 + 16(|B|/|A'|)^2, 4|B|^2)",
               B=comp.interval, A_sub=comp.sub)
    ledger.add("sigma0", comp.sigma0, "min over A' of |sigma|", level=comp.level)
    ledger.add("c1", loc["c1"], "|sigma on A|^2 a^2", j=j)
    ledger.add("c2", loc["c2"], "|sigma' on A|^2 a^2", j=j)
    ledger.add("c3", loc["c3"], "c2 c(B,A') / (lambda sigma0^2)", j=j)
    ledger.add("gamma_tilde(1,beta)", loc["gamma_tilde"],
               "max(sqrt(c3)|sigma|, c3/(2 beta), c3 lambda sigma0^2/alpha)", alpha=1.0,
               beta=loc["beta"])
    ledger.add("gamma(1,beta)", loc["gamma"], "gamma_tilde + 2 c1/alpha", alpha=1.0,
               beta=loc["beta"])
    ledger.add("a_j", c0, "min(|sigma on A_j|^-2, (1-beta)/max(1/2, gamma(1,beta)))/2",
               j=j, beta=loc["beta"])
    ledger.add("c0", c0, "c0 := a_j for the component containing J",
               note="identification of c0 is a design decision")
    union = decomp.union()
    best = None
    for alpha in alphas:
        c1, c2, c3, gt, g = mixed_term_constants(union.sup, union.dsup, decomp.sup, a, lam,
                                                 union.birman, union.sigma0, float(alpha), 1.0)
        g_alpha = max(1.0, g)
        for k in range(n_b):
            b = float(b_max / 2 ** k)
            window = (decomp.s >= s0 - b) & (decomp.s <= s0 + b)
            msig = float(np.abs(decomp.sigma[window]).min())
            if msig <= 0:
                continue
            ch = global_hardy_bound(lam, g_alpha, float(alpha), b, c0, msig, power=2)
            if best is None or ch > best[0]:
                best = (ch, float(alpha), b, g_alpha, msig, (c1, c2, c3, gt, g))
    if best is None:
        raise HardyUnavailableError("no admissible window J")
    ch, alpha, b, g_alpha, msig, (c1, c2, c3, gt, g) = best
    ch1 = global_hardy_bound(lam, g_alpha, alpha, b, c0, msig, power=1)
    ledger.add("c3(A=supp)", c3, "c2 c(B,A') / (lambda sigma0^2) with A = supp sigma")
    ledger.add("gamma(alpha,1)", g, "gamma_tilde + 2 c1/alpha with A = supp sigma", alpha=alpha)
    ledger.add("gamma_alpha", g_alpha, "max(1, gamma(alpha,1))", alpha=alpha)
    ledger.add("min_J|sigma|", msig, "min over J of |sigma|", b=b, s0=s0)
    ledger.add("c_h", ch, "[(16+2b^2)/(b^2 c0 lambda min_J|sigma|^2) + 16(gamma_alpha/(1-alpha)+1)]^-1",
               alpha=alpha, b=b, s0=s0)
    ledger.add("c_h(min|sigma| variant)", ch1,
               "[(16+2b^2)/(b^2 c0 lambda min_J|sigma|) + 16(gamma_alpha/(1-alpha)+1)]^-1",
               alpha=alpha, b=b, s0=s0, note="variant with the first power of min|sigma|")
    return HardyBound(c_h=ch, c_h_min_sigma=ch1, alpha=alpha, b=b, s0=s0, c0=c0,
                      gamma_alpha=g_alpha, min_sigma_J=msig, beta=loc["beta"], ledger=ledger)


# --------------------------------------------------------------------------
# numerical verification
# --------------------------------------------------------------------------

def hardy_weight(s0: float) -> Callable:
    return lambda s: 1.0 / (1.0 + (np.asarray(s) - s0) ** 2)


@dataclass(frozen=True)
class HardyVerification:
    mu: float
    residual: float
    bound: float | None
    L: float
    ends: str

    @property
    def passes(self) -> bool:
        return self.mu > 0 and (self.bound is None or self.mu >= self.bound - 1e-8)

    @property
    def sharpness(self) -> float | None:
        return None if not self.bound else self.mu / self.bound


def verify_hardy(form: SymmetricForm, s0: float = 0.0, bound: float | None = None) -> HardyVerification:
    """Smallest ``mu`` with ``(A - E1 M) psi = mu W psi``, ``W = 1/(1 + (s - s0)^2)``."""
    mu, _, res = weighted_ground_value(form, hardy_weight(s0), s0=s0)
    return HardyVerification(mu=mu, residual=res, bound=bound, L=form.grid.L, ends=form.grid.ends)


def restricted_l_sigma(grid: TruncatedTubeGrid, sigma: Callable, window: tuple[float, float],
                       sign: int = 1) -> SymmetricForm:
    """``l_sigma`` with slab and edge contributions kept only inside ``window``.

    Every contribution with its quadrature point outside the window is dropped,
    which mirrors integration over ``window x omega``.
    """
    lo, hi = window
    zero_edge = (np.zeros(grid.domain.n), 0.0, None)

    def edge(se):
        if not lo <= se <= hi:
            return zero_edge
        val = float(sigma(se))
        return None if val == 0.0 else (None, sign * val, None)

    def slab(sk):
        return None

    form = _assemble(grid, edge, slab, kind="l_sigma_window")
    inside = (grid.s >= lo) & (grid.s <= hi)
    diag = form.diag.copy()
    ds = grid.ds
    for k in np.flatnonzero(~inside):
        # remove the transverse stiffness of slabs outside the window
        diag[k] -= ds * grid.basis.stiffness
    return SymmetricForm(grid=grid, diag=diag, off=form.off, E1=form.E1, kind=form.kind)


def local_hardy_margin(form_window: SymmetricForm, sigma: Callable, window, a_j: float,
                       lam: float, psi: np.ndarray) -> tuple[float, float]:
    """``(LHS, RHS)`` of the local Hardy inequality for one coefficient vector."""
    grid = form_window.grid
    inside = (grid.s >= window[0]) & (grid.s <= window[1])
    m = form_window.m
    c = psi.reshape(grid.n_slabs, m)
    gram = grid.basis.gram
    slab_norm = grid.ds * np.einsum("ki,i,ki->k", c, gram, c)
    lhs = form_window.energy(psi) - form_window.E1 * float(slab_norm[inside].sum())
    rhs = a_j * lam * float(np.sum(np.asarray(sigma(grid.s[inside])) ** 2 * slab_norm[inside]))
    return lhs, rhs


def verify_local_hardy(form_window: SymmetricForm, sigma: Callable, window, a_j: float, lam: float,
                       trials: int = 1000, seed: int = 0, extra: Sequence[np.ndarray] = ()) -> dict:
    """Minimum of ``LHS - RHS`` over random ground-mode trials ``g x J1``, random
    vectors and the supplied vectors."""
    rng = np.random.default_rng(seed)
    grid = form_window.grid
    m = form_window.m
    inside = (grid.s >= window[0]) & (grid.s <= window[1])
    worst = math.inf
    kinds = {}
    for t in range(trials):
        c = np.zeros((grid.n_slabs, m))
        g = np.zeros(grid.n_slabs)
        g[inside] = rng.normal(size=inside.sum())
        if t % 2 == 0 and grid.basis.is_modal:
            c[:, 0] = g
        else:
            c[inside] = rng.normal(size=(inside.sum(), m))
        lhs, rhs = local_hardy_margin(form_window, sigma, window, a_j, lam, c.ravel())
        scale = max(abs(lhs), abs(rhs), 1e-300)
        margin = (lhs - rhs) / scale
        worst = min(worst, margin)
    for k, v in enumerate(extra):
        lhs, rhs = local_hardy_margin(form_window, sigma, window, a_j, lam, v)
        margin = (lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
        kinds[f"extra{k}"] = margin
        worst = min(worst, margin)
    return {"min_relative_margin": worst, "holds": bool(worst >= -1e-8), "extra": kinds,
            "trials": trials}


def discrete_radial_function(domain: CrossSectionDomain, radius: float,
                             center=(0.0, 0.0)) -> np.ndarray:
    """Smoothest nodal function supported in a disk that the discrete ``d_tau`` annihilates.

    Among vectors supported on nodes with ``|t - center| < radius`` and lying in
    the kernel of the discrete angular derivative, return the one with the
    smallest Dirichlet energy, normalised in the discrete ``L2(omega)`` norm.
    """
    pts = domain.points - np.asarray(center)
    sel = np.flatnonzero(np.hypot(pts[:, 0], pts[:, 1]) < radius)
    if sel.size == 0:
        raise ValueError("no node inside the requested disk")
    D = angular_derivative_matrix(domain)[:, sel].toarray()
    _, sv, vt = np.linalg.svd(D)
    tol = max(D.shape) * np.finfo(float).eps * max(sv.max(initial=0.0), 1.0)
    rank = int(np.sum(sv > tol))
    null = vt[rank:].T
    if null.shape[1] == 0:
        raise ValueError("angular derivative has trivial kernel on this disk")
    K = stiffness_matrix(domain)[sel][:, sel].toarray()
    Mw = domain.mass[sel]
    kk = null.T @ K @ null
    mm = null.T @ (Mw[:, None] * null)
    vals, vecs = sla.eigh(0.5 * (kk + kk.T), 0.5 * (mm + mm.T))
    f_sel = null @ vecs[:, 0]
    f = np.zeros(domain.n)
    f[sel] = f_sel
    if f[np.argmax(np.abs(f))] < 0:
        f = -f
    return f / math.sqrt(domain.inner(f, f))


def classical_hardy_ratio(n: int = 2000, length: float = 20.0) -> float:
    """Largest ``sum v^2/x^2 / sum (v')^2`` over grid functions with ``v(0) = v(L) = 0``.

    Should not exceed 4 (up to the discretisation error).
    """
    h = length / n
    x = h * np.arange(1, n)
    K = (np.diag(np.full(n - 1, 2.0)) - np.diag(np.ones(n - 2), 1) - np.diag(np.ones(n - 2), -1)) / h
    W = h / x ** 2
    scale = 1.0 / np.sqrt(W)
    vals = sla.eigh(scale[:, None] * K * scale[None, :], eigvals_only=True, subset_by_index=[0, 0])
    return float(1.0 / vals[0])


def _window_matrices(form_window: SymmetricForm, sigma: Callable, window):
    grid = form_window.grid
    m = form_window.m
    inside = np.flatnonzero((grid.s >= window[0]) & (grid.s <= window[1]))
    k0, k1 = inside[0], inside[-1] + 1
    n = k1 - k0
    A = np.zeros((n * m, n * m))
    for i, k in enumerate(range(k0, k1)):
        A[i * m:(i + 1) * m, i * m:(i + 1) * m] = form_window.diag[k]
        if i > 0:
            A[i * m:(i + 1) * m, (i - 1) * m:i * m] = form_window.off[k - 1]
            A[(i - 1) * m:i * m, i * m:(i + 1) * m] = form_window.off[k - 1].T
    gram = np.diag(grid.basis.gram) if grid.basis.gram.ndim == 1 else grid.basis.gram
    Mb = grid.ds * gram
    M = np.kron(np.eye(n), Mb)
    W = np.kron(np.diag(np.asarray(sigma(grid.s[k0:k1]), dtype=float) ** 2), Mb)
    return A - form_window.E1 * M, W, M


def sharp_local_coefficient(form_window: SymmetricForm, sigma: Callable, window, lam: float) -> dict:
    """Largest ``a`` with ``LHS >= a lam int |sigma psi|^2`` on the discrete window space.

    With ``K = A_J - E1 M_J`` positive definite this is ``1/(lam rho)``, ``rho``
    the largest eigenvalue of the pencil ``(W_J, K)``; a valid ``a_j`` must not
    exceed it.  ``form_floor`` is the lowest eigenvalue of ``(K, M_J)``.
    """
    K, W, M = _window_matrices(form_window, sigma, window)
    K = 0.5 * (K + K.T)
    floor = float(sla.eigh(K, M, eigvals_only=True, subset_by_index=[0, 0])[0])
    if floor <= 0 or lam <= 0:
        return {"sharp": 0.0 if lam > 0 else math.inf, "form_floor": floor}
    n = K.shape[0]
    rho = float(sla.eigh(W, K, eigvals_only=True, subset_by_index=[n - 1, n - 1])[0])
    return {"sharp": math.inf if rho <= 0 else 1.0 / (lam * rho), "form_floor": floor}
