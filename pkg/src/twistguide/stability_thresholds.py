"""Explicit stability constants C1..C7, the threshold epsilon, and bend-strength sweeps.

Two modes are supported.  ``"bend"``: the bend strength is
``k = |kappa1| + |kappa1'|`` and the twisting function is ``kappa2 - theta'``.
``"bend_torsion"``: the torsion is treated as part of the perturbation,
``k = |kappa1| + |kappa1'| + |kappa2|``, and the twist is ``theta'`` alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cross_section import CrossSectionDomain
from .curve_geometry import CurvatureProfile, check_injectivity
from .errors import ConfigurationError, HardyUnavailableError
from .hardy_constants import ConstantsLedger
from .waveguide_operators import (
    TransverseBasis,
    assemble_q,
    eigenvalues_below_threshold,
    make_tube_grid,
)

MODES = ("bend", "bend_torsion")
ETA = 1e-6


@dataclass
class ThresholdLedger:
    mode: str
    a: float
    C: dict
    k_definition: str
    inputs: dict
    constraints: dict = field(default_factory=dict)
    epsilon: float | None = None

    def to_constants_ledger(self) -> ConstantsLedger:
        led = ConstantsLedger()
        forms = _FORMULAS[self.mode]
        for name in ("C1", "C2", "C3", "C4", "C5", "C6", "C7"):
            led.add(name, self.C[name], forms[name], mode=self.mode, **self.inputs)
        for name, val in self.constraints.items():
            led.add(f"eps[{name}]", val, _CONSTRAINTS[name])
        if self.epsilon is not None:
            led.add("epsilon", self.epsilon, "min of the constraints above",
                    note=f"k = {self.k_definition}")
        return led


_FORMULAS = {
    "bend": {
        "C1": "6a(1 + a|kappa2 - theta'|)^2",
        "C2": "1 + a(1 + |theta'|)",
        "C3": "1 + a|kappa2 - theta'| + a^2|kappa2 - theta'|^2",
    },
    "bend_torsion": {
        "C1": "6a(1 + a|kappa2| + a|theta'|)^2",
        "C2": "1 + a(1 + |theta'|)",
        "C3": "max(2, 1 + 2a^2|theta'|^2)",
    },
}
for _f in _FORMULAS.values():
    _f.update({"C4": "3 C1 C3", "C5": "C2 sqrt(3 C3 (1 + C4))", "C6": "1 + C4", "C7": "2 C5^2"})

_CONSTRAINTS = {
    "unit": "k <= 1",
    "immersion": "k <= 1/(2 a r), r = |kappa1|/k for the scaled shape",
    "C6": "k <= (1 - eta)/C6",
    "torsion_cap": "k < 1/a (torsion restriction)",
    "positivity": "c_h / (C6 c_h + (C6 E1 + C7) max_I (1 + (s - s0)^2))",
}


def constants_ledger(mode: str, a: float, norm_twist: float, norm_thetadot: float,
                     cap: bool = False) -> ThresholdLedger:
    """C1..C7 for the given mode.

    ``norm_twist`` is ``|kappa2 - theta'|`` (bend) or ``|kappa2|`` (bend_torsion).
    With ``cap=True`` in bend_torsion mode ``a|kappa2|`` is replaced by its
    admissible maximum 1, which makes the constants independent of ``k``.
    """
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}")
    if a < 0 or norm_twist < 0 or norm_thetadot < 0:
        raise ConfigurationError("radius and norms must be nonnegative")
    if mode == "bend":
        r = norm_twist
        C1 = 6 * a * (1 + a * r) ** 2
        C3 = 1 + a * r + a * a * r * r
        kdef = "|kappa1| + |kappa1'|"
    else:
        ak2 = 1.0 if cap else a * norm_twist
        C1 = 6 * a * (1 + ak2 + a * norm_thetadot) ** 2
        C3 = max(2.0, 1 + 2 * a * a * norm_thetadot ** 2)
        kdef = "|kappa1| + |kappa1'| + |kappa2|"
    C2 = 1 + a * (1 + norm_thetadot)
    C4 = 3 * C1 * C3
    C5 = C2 * math.sqrt(3 * C3 * (1 + C4))
    C6 = 1 + C4
    C7 = 2 * C5 ** 2
    C = dict(C1=C1, C2=C2, C3=C3, C4=C4, C5=C5, C6=C6, C7=C7)
    inputs = {"a": a, "norm_twist": norm_twist, "norm_thetadot": norm_thetadot}
    if mode == "bend_torsion":
        inputs["cap"] = cap
    return ThresholdLedger(mode=mode, a=a, C=C, k_definition=kdef, inputs=inputs)


def positivity_bound(c_h: float, C6: float, C7: float, E1: float, weight_max: float) -> float:
    return c_h / (C6 * c_h + (C6 * E1 + C7) * weight_max)


def epsilon_threshold(ledger: ThresholdLedger, c_h: float, E1: float,
                      interval: tuple[float, float], s0: float, a: float | None = None,
                      kappa1_fraction: float = 1.0, n_grid: int = 2001) -> float:
    """Smallest of the admissibility constraints on ``k``; stored on the ledger.

    ``kappa1_fraction`` is ``|kappa1|/k`` for the scaled bump shape, so that the
    immersion requirement ``|kappa1| <= 1/(2a)`` becomes a bound on ``k``.
    """
    if not c_h > 0:
        raise HardyUnavailableError("c_h <= 0: no stability threshold")
    a = ledger.a if a is None else a
    s = np.linspace(interval[0], interval[1], n_grid)
    wmax = float(np.max(1 + (s - s0) ** 2))
    C6, C7 = ledger.C["C6"], ledger.C["C7"]
    cons = {"unit": 1.0,
            "immersion": math.inf if a * kappa1_fraction == 0 else 1 / (2 * a * kappa1_fraction),
            "C6": (1 - ETA) / C6,
            "positivity": positivity_bound(c_h, C6, C7, E1, wmax)}
    if ledger.mode == "bend_torsion" and ledger.inputs.get("cap"):
        cons["torsion_cap"] = (1 - ETA) / a if a > 0 else math.inf
    ledger.constraints = cons
    ledger.epsilon = float(min(cons.values()))
    ledger.inputs.update(c_h=c_h, E1=E1, s0=s0, interval=tuple(interval), weight_max=wmax)
    return ledger.epsilon


def positivity_integrand(k: float, ledger: ThresholdLedger, c_h: float, E1: float,
                         s: np.ndarray, s0: float) -> np.ndarray:
    """``(1 - C6 k) c_h/(1 + (s-s0)^2) - k (C6 E1 + C7)``; nonnegative on I for ``k <= eps``."""
    C6, C7 = ledger.C["C6"], ledger.C["C7"]
    return (1 - C6 * k) * c_h / (1 + (s - s0) ** 2) - k * (C6 * E1 + C7)


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------

def shape_strength(profile: CurvatureProfile, mode: str) -> tuple[float, float]:
    """``(k, |kappa1|)`` of the profile with unit scaling factor."""
    n = profile.norms
    k = n["kappa1"] + n["dkappa1"]
    if mode == "bend_torsion":
        k += n["kappa2"]
    return k, n["kappa1"]


def scale_to_strength(profile: CurvatureProfile, k: float, mode: str) -> CurvatureProfile:
    """Scale the bend (and in bend_torsion mode the torsion) so the strength equals ``k``."""
    k0, _ = shape_strength(profile, mode)
    if k0 == 0:
        raise ConfigurationError("profile has no bend to scale")
    t = k / k0
    return profile.scaled(kappa1=t, kappa2=t if mode == "bend_torsion" else 1.0)


@dataclass
class SweepRow:
    k: float
    L: float
    count: int
    lowest: float
    E1: float
    below_eps: bool
    injectivity: str
    residual: float


@dataclass
class SweepResult:
    rows: list[SweepRow]
    epsilon: float | None
    k_c: float | None
    monotone: bool
    kappa1_ratio: float

    @property
    def conservative(self) -> bool:
        """True when no eigenvalue below ``E1`` appears for ``k <= epsilon``."""
        if self.epsilon is None:
            return True
        return all(r.count == 0 for r in self.rows if r.k <= self.epsilon)


def bend_sweep(domain: CrossSectionDomain, profile: CurvatureProfile, k_values: Sequence[float],
               L_values: Sequence[float] = (20.0,), ds: float = 0.05, mode: str = "bend",
               basis: TransverseBasis | None = None, ends: str = "transparent",
               epsilon: float | None = None, modes: int = 20,
               progress: Callable[[SweepRow], None] | None = None) -> SweepResult:
    """Lowest eigenvalue below ``E1`` for bend strengths ``k`` and truncations ``L``.

    ``k_c`` is the smallest ``k`` with an eigenvalue below ``E1`` at every
    ``L``; ``None`` if none appears.
    """
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}")
    from .waveguide_operators import transverse_basis

    basis = transverse_basis(domain, modes) if basis is None else basis
    k0, n1 = shape_strength(profile, mode)
    ratio = profile.norms["dkappa1"] / n1 if n1 > 0 else math.nan
    rows = []
    for k in sorted(float(x) for x in k_values):
        prof = scale_to_strength(profile, k, mode) if k > 0 else profile.scaled(
            kappa1=0.0, kappa2=0.0 if mode == "bend_torsion" else 1.0)
        inj = check_injectivity(prof, domain.radius)
        status = inj.status
        for L in L_values:
            grid = make_tube_grid(domain, L, ds, ends=ends, basis=basis, support=prof.support)
            form = assemble_q(grid, prof, None if status == "PASS" else f"injectivity {status}")
            res = eigenvalues_below_threshold(form)
            row = SweepRow(k=k, L=float(L), count=res.count,
                           lowest=float(res.values[0]) if res.count else float(res.lowest),
                           E1=res.E1, below_eps=epsilon is not None and k <= epsilon,
                           injectivity=status,
                           residual=float(res.residuals.max()) if res.count else 0.0)
            rows.append(row)
            if progress:
                progress(row)
    bound = {}
    for r in rows:
        bound.setdefault(r.k, []).append(r.count > 0)
    ks = sorted(bound)
    flags = [all(bound[k]) for k in ks]
    k_c = next((k for k, f in zip(ks, flags) if f), None)
    monotone = all(not (a and not b) for a, b in zip(flags, flags[1:]))
    return SweepResult(rows=rows, epsilon=epsilon, k_c=k_c, monotone=monotone, kappa1_ratio=ratio)
