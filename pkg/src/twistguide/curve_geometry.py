"""Reference curve, moving frame, tube map and induced metric.

A curve is described by its curvature ``kappa1``, torsion ``kappa2`` and the
rotation angle ``theta`` of the cross-section relative to the Frenet normals.
All three are sums of smooth bumps.  The frame is integrated with classical
RK4 from the identity triad at the left end of the support interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

from .errors import ImmersionError, IntegratorStepError, InvalidProfileError

_BUMP_KINDS = ("cos2", "poly")


# --------------------------------------------------------------------------
# bumps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Bump:
    """``amplitude * shape((s - center) / width)``, supported on ``|s - center| < width/2``.

    ``cos2`` is ``cos(pi x)^2`` (C1), ``poly`` is ``(1 - 4x^2)^3`` (C2).
    """

    kind: str
    amplitude: float
    center: float
    width: float

    def __post_init__(self):
        if self.kind not in _BUMP_KINDS:
            raise InvalidProfileError(f"unknown bump kind {self.kind!r}")
        if not self.width > 0:
            raise InvalidProfileError("bump width must be positive")

    @property
    def support(self) -> tuple[float, float]:
        return (self.center - 0.5 * self.width, self.center + 0.5 * self.width)

    def scaled(self, factor: float) -> "Bump":
        return replace(self, amplitude=self.amplitude * factor)

    def derivatives(self, s):
        """Value and first three derivatives at ``s``."""
        s = np.asarray(s, dtype=float)
        w = self.width
        x = (s - self.center) / w
        inside = np.abs(x) < 0.5
        amp = self.amplitude
        if self.kind == "cos2":
            p = np.pi / w
            arg = 2 * np.pi * x
            f = 0.5 * (1 + np.cos(arg))
            d1 = -p * np.sin(arg)
            d2 = -2 * p * p * np.cos(arg)
            d3 = 4 * p ** 3 * np.sin(arg)
        else:
            u = 1 - 4 * x * x
            du = -8 * x / w
            f = u ** 3
            d1 = 3 * u * u * du
            d2 = 6 * u * du * du + 3 * u * u * (-8 / w ** 2)
            d3 = 6 * du ** 3 + 18 * u * du * (-8 / w ** 2)
        out = []
        for arr in (f, d1, d2, d3):
            out.append(np.where(inside, amp * arr, 0.0))
        return out

    def integral_to(self, s):
        """``int_{-inf}^s`` of the bump."""
        s = np.asarray(s, dtype=float)
        lo, hi = self.support
        w = self.width
        x = np.clip((s - self.center) / w, -0.5, 0.5)
        if self.kind == "cos2":
            prim = 0.5 * (x + 0.5) + np.sin(2 * np.pi * x) / (4 * np.pi)
        else:
            # int_{-1/2}^x (1-4y^2)^3 dy
            prim = x - 4 * x ** 3 + 48 * x ** 5 / 5 - 64 * x ** 7 / 7 + 8 / 35
        return self.amplitude * w * prim

    @property
    def total(self) -> float:
        return float(self.integral_to(self.support[1]))

    def to_dict(self):
        return {"kind": self.kind, "amplitude": self.amplitude, "center": self.center,
                "width": self.width}


def bump_from_dict(d: dict) -> Bump:
    return Bump(kind=d.get("kind", "cos2"), amplitude=float(d["amplitude"]),
                center=float(d.get("center", 0.0)), width=float(d["width"]))


def _sum(bumps: Sequence[Bump], s, order):
    out = np.zeros_like(np.asarray(s, dtype=float))
    for b in bumps:
        out = out + b.derivatives(s)[order]
    return out


def _sup(bumps: Sequence[Bump], order, grid) -> float:
    """Sup-norm of a derivative of a bump sum: grid maximum refined locally."""
    if not bumps:
        return 0.0
    vals = np.abs(_sum(bumps, grid, order))
    k = int(np.argmax(vals))
    best = float(vals[k])
    if best == 0.0:
        return 0.0
    h = grid[1] - grid[0]
    res = minimize_scalar(lambda x: -abs(float(_sum(bumps, x, order))),
                          bounds=(grid[k] - h, grid[k] + h), method="bounded",
                          options={"xatol": 1e-12})
    return max(best, -float(res.fun))


# --------------------------------------------------------------------------
# profile
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CurvatureProfile:
    """Curvature, torsion and rotation angle of a tube, with sampled values.

    The angle is either a sum of bumps (``theta``) or the primitive of a sum of
    bumps (``theta_dot``); in the latter case it is constant, not necessarily
    zero, to the right of the support.
    """

    kappa1_bumps: tuple[Bump, ...]
    kappa2_bumps: tuple[Bump, ...]
    theta_bumps: tuple[Bump, ...]
    theta_is_rate: bool
    support: tuple[float, float]
    ds: float
    s: np.ndarray = field(repr=False)
    norms: dict = field(default_factory=dict)

    @property
    def length(self) -> float:
        return self.support[1] - self.support[0]

    def kappa1(self, s):
        return _sum(self.kappa1_bumps, s, 0)

    def dkappa1(self, s):
        return _sum(self.kappa1_bumps, s, 1)

    def kappa2(self, s):
        return _sum(self.kappa2_bumps, s, 0)

    def theta(self, s):
        if self.theta_is_rate:
            out = np.zeros_like(np.asarray(s, dtype=float))
            for b in self.theta_bumps:
                out = out + b.integral_to(s)
            return out
        return _sum(self.theta_bumps, s, 0)

    def dtheta(self, s):
        return _sum(self.theta_bumps, s, 0 if self.theta_is_rate else 1)

    def ddtheta(self, s):
        return _sum(self.theta_bumps, s, 1 if self.theta_is_rate else 2)

    def rho(self, s):
        """``kappa2 - theta'``, the effective twist of the cross-section."""
        return self.kappa2(s) - self.dtheta(s)

    def evaluate(self, s) -> dict:
        return {"kappa1": self.kappa1(s), "dkappa1": self.dkappa1(s), "kappa2": self.kappa2(s),
                "theta": self.theta(s), "dtheta": self.dtheta(s), "ddtheta": self.ddtheta(s)}

    @property
    def samples(self) -> dict:
        return self.evaluate(self.s)

    @property
    def total_twist(self) -> float:
        return float(self.theta(self.support[1] + 1.0) - self.theta(self.support[0] - 1.0))

    def scaled(self, kappa1: float = 1.0, kappa2: float = 1.0, theta: float = 1.0) -> "CurvatureProfile":
        """Profile with every bump family multiplied by the given factor."""
        return make_profile([b.scaled(kappa1) for b in self.kappa1_bumps],
                            [b.scaled(kappa2) for b in self.kappa2_bumps],
                            [b.scaled(theta) for b in self.theta_bumps],
                            ds=self.ds, theta_is_rate=self.theta_is_rate, support=self.support,
                            allow_straight_bend=True)

    def to_dict(self):
        key = "theta_dot" if self.theta_is_rate else "theta"
        return {"kappa1": [b.to_dict() for b in self.kappa1_bumps],
                "kappa2": [b.to_dict() for b in self.kappa2_bumps],
                key: [b.to_dict() for b in self.theta_bumps],
                "support": list(self.support), "ds": self.ds}


def make_profile(kappa1: Iterable[Bump | dict] = (), kappa2: Iterable[Bump | dict] = (),
                 theta: Iterable[Bump | dict] = (), ds: float = 1e-3, *,
                 theta_is_rate: bool = False, support: tuple[float, float] | None = None,
                 allow_straight_bend: bool = True) -> CurvatureProfile:
    """Build a profile from bump lists.

    ``support`` defaults to the hull of all bump supports.  ``kappa1`` must be
    positive on the open support unless it vanishes identically.
    """
    def _as_bumps(items):
        return tuple(b if isinstance(b, Bump) else bump_from_dict(b) for b in items)

    k1, k2, th = _as_bumps(kappa1), _as_bumps(kappa2), _as_bumps(theta)
    if not ds > 0:
        raise InvalidProfileError("ds must be positive")
    all_b = k1 + k2 + th
    if support is None:
        if all_b:
            support = (min(b.support[0] for b in all_b), max(b.support[1] for b in all_b))
        else:
            support = (-0.5, 0.5)
    sa, sb = map(float, support)
    if not sb > sa:
        raise InvalidProfileError("support interval must have positive length")
    for b in k1 + k2:
        lo, hi = b.support
        if lo < sa - 1e-12 or hi > sb + 1e-12:
            raise InvalidProfileError("curvature bumps must be supported in the interval I")
    if not theta_is_rate:
        for b in th:
            lo, hi = b.support
            if lo < sa - 1e-12 or hi > sb + 1e-12:
                raise InvalidProfileError("angle bumps must be supported in the interval I")

    n = max(2, int(math.ceil((sb - sa) / ds)))
    s = np.linspace(sa, sb, n + 1)
    nonzero_k1 = any(b.amplitude != 0.0 for b in k1)
    if nonzero_k1:
        inner = s[1:-1]
        k1_vals = _sum(k1, inner, 0)
        if np.any(k1_vals <= 0):
            bad = float(inner[np.argmax(k1_vals <= 0)])
            raise InvalidProfileError(f"kappa1 must be positive on I; fails at s={bad:.6g}")
    elif not allow_straight_bend and any(b.amplitude != 0.0 for b in k2):
        raise InvalidProfileError("torsion without curvature is not allowed here")

    fine = np.linspace(sa - 1e-9, sb + 1e-9, max(4001, 4 * n + 1))
    theta_fine = fine
    if not theta_is_rate and th:
        theta_fine = np.linspace(min(b.support[0] for b in th), max(b.support[1] for b in th),
                                 max(4001, 4 * n + 1))
    rate_order = 0 if theta_is_rate else 1
    norms = {
        "kappa1": _sup(k1, 0, fine),
        "dkappa1": _sup(k1, 1, fine),
        "kappa2": _sup(k2, 0, fine),
        "dtheta": _sup(th, rate_order, theta_fine),
        "ddtheta": _sup(th, rate_order + 1, theta_fine),
    }
    prof = CurvatureProfile(k1, k2, th, theta_is_rate, (sa, sb), float(ds), s, norms)
    norms["rho"] = _sup_callable(prof.rho, fine)
    norms["theta"] = float(np.max(np.abs(prof.theta(fine)))) if th else 0.0
    return prof


def _sup_callable(fn, grid) -> float:
    vals = np.abs(fn(grid))
    k = int(np.argmax(vals))
    if vals[k] == 0.0:
        return 0.0
    h = grid[1] - grid[0]
    res = minimize_scalar(lambda x: -abs(float(fn(np.array([x]))[0])),
                          bounds=(grid[k] - h, grid[k] + h), method="bounded",
                          options={"xatol": 1e-12})
    return max(float(vals[k]), -float(res.fun))


def straight_profile(ds: float = 1e-2, support=(-0.5, 0.5)) -> CurvatureProfile:
    return make_profile(ds=ds, support=support)


# --------------------------------------------------------------------------
# frame
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FrameField:
    """Frenet triad and centreline sampled on a uniform arclength grid.

    ``e[k]`` holds the rows ``e1, e2, e3`` at ``s[k]``.
    """

    s: np.ndarray
    gamma: np.ndarray
    e: np.ndarray
    profile: CurvatureProfile = field(repr=False)
    gram_defect: float = 0.0

    @property
    def rotated_normals(self) -> np.ndarray:
        """Rows ``n2, n3`` of the rotated frame at every sample."""
        return _rotated(self.e, self.profile.theta(self.s))

    def at(self, s):
        """Centreline and triad at arbitrary ``s`` (cubic Hermite inside, exact extension outside)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        grid = self.s
        h = grid[1] - grid[0]
        k = np.clip(np.floor((s - grid[0]) / h).astype(int), 0, len(grid) - 2)
        x = (s - grid[k]) / h
        kmat0 = _curvature_matrix(self.profile, grid[k])
        kmat1 = _curvature_matrix(self.profile, grid[k + 1])
        e0, e1 = self.e[k], self.e[k + 1]
        de0 = np.einsum("nij,njk->nik", kmat0, e0)
        de1 = np.einsum("nij,njk->nik", kmat1, e1)
        g0, g1 = self.gamma[k], self.gamma[k + 1]
        dg0, dg1 = e0[:, 0], e1[:, 0]
        h00, h10, h01, h11 = _hermite(x)
        e = (h00[:, None, None] * e0 + h10[:, None, None] * h * de0
             + h01[:, None, None] * e1 + h11[:, None, None] * h * de1)
        g = h00[:, None] * g0 + h10[:, None] * h * dg0 + h01[:, None] * g1 + h11[:, None] * h * dg1
        # exact continuation beyond the sampled range (curvatures vanish there)
        left = s < grid[0]
        right = s > grid[-1]
        if left.any():
            e[left] = self.e[0]
            g[left] = self.gamma[0] + (s[left] - grid[0])[:, None] * self.e[0, 0]
        if right.any():
            e[right] = self.e[-1]
            g[right] = self.gamma[-1] + (s[right] - grid[-1])[:, None] * self.e[-1, 0]
        return g, e


def _hermite(x):
    x2, x3 = x * x, x * x * x
    return 2 * x3 - 3 * x2 + 1, x3 - 2 * x2 + x, -2 * x3 + 3 * x2, x3 - x2


def _curvature_matrix(profile: CurvatureProfile, s) -> np.ndarray:
    s = np.atleast_1d(np.asarray(s, dtype=float))
    k1, k2 = profile.kappa1(s), profile.kappa2(s)
    mat = np.zeros((len(s), 3, 3))
    mat[:, 0, 1] = k1
    mat[:, 1, 0] = -k1
    mat[:, 1, 2] = k2
    mat[:, 2, 1] = -k2
    return mat


def _rotated(e, theta):
    c, sn = np.cos(theta), np.sin(theta)
    n2 = c[..., None] * e[..., 1, :] - sn[..., None] * e[..., 2, :]
    n3 = sn[..., None] * e[..., 1, :] + c[..., None] * e[..., 2, :]
    return np.stack([n2, n3], axis=-2)


def integrate_frame(profile: CurvatureProfile, ds: float | None = None,
                    extend: tuple[float, float] | None = None,
                    max_defect: float = 1e-6) -> FrameField:
    """RK4 for ``e_i' = K_ij e_j`` and ``Gamma' = e1`` from the identity triad at ``s_a``.

    Outside the support the frame is continued exactly: constant triad, affine
    centreline.  ``extend`` optionally widens the sampled range.
    """
    ds = profile.ds if ds is None else float(ds)
    sa, sb = profile.support
    n = max(1, int(math.ceil((sb - sa) / ds)))
    h = (sb - sa) / n
    s = sa + h * np.arange(n + 1)
    e = np.empty((n + 1, 3, 3))
    g = np.empty((n + 1, 3))
    e[0] = np.eye(3)
    g[0] = (sa, 0.0, 0.0)
    kmats = _curvature_matrix(profile, np.concatenate([s, s[:-1] + 0.5 * h]))
    k_node, k_mid = kmats[: n + 1], kmats[n + 1:]
    for k in range(n):
        ek = e[k]
        a1 = k_node[k] @ ek
        a2 = k_mid[k] @ (ek + 0.5 * h * a1)
        a3 = k_mid[k] @ (ek + 0.5 * h * a2)
        a4 = k_node[k + 1] @ (ek + h * a3)
        e[k + 1] = ek + (h / 6.0) * (a1 + 2 * a2 + 2 * a3 + a4)
        # Gamma' = e1 along the same stages
        g[k + 1] = g[k] + (h / 6.0) * (ek[0] + 2 * (ek + 0.5 * h * a1)[0]
                                        + 2 * (ek + 0.5 * h * a2)[0] + (ek + h * a3)[0])
    gram = np.einsum("nij,nkj->nik", e, e) - np.eye(3)
    defect = float(np.max(np.abs(gram)))
    if defect > max_defect:
        raise IntegratorStepError(
            f"frame orthonormality drift {defect:.3e} exceeds {max_defect:.1e}; reduce ds")
    if extend is not None:
        lo, hi = extend
        n_lo = max(0, int(math.ceil((sa - lo) / h)))
        n_hi = max(0, int(math.ceil((hi - sb) / h)))
        s_lo = sa - h * np.arange(n_lo, 0, -1)
        s_hi = sb + h * np.arange(1, n_hi + 1)
        e = np.concatenate([np.repeat(e[:1], n_lo, 0), e, np.repeat(e[-1:], n_hi, 0)])
        g = np.concatenate([g[0] + (s_lo - sa)[:, None] * e[0, 0],
                            g, g[-1] + (s_hi - sb)[:, None] * e[-1, 0]])
        s = np.concatenate([s_lo, s, s_hi])
    return FrameField(s=s, gamma=g, e=e, profile=profile, gram_defect=defect)


def frame_increment_check(frame: FrameField, n_pairs: int = 10_000, seed: int = 0) -> dict:
    """Sample ``|e_i(s2) - e_i(s1)| <= 2 k_i min(|s2 - s1|, |I|)`` on random pairs."""
    prof = frame.profile
    n1, n2 = prof.norms["kappa1"], prof.norms["kappa2"]
    bounds_k = np.array([n1, n1 + n2, n2])
    rng = np.random.default_rng(seed)
    i = rng.integers(0, len(frame.s), n_pairs)
    j = rng.integers(0, len(frame.s), n_pairs)
    diff = np.linalg.norm(frame.e[i] - frame.e[j], axis=2)
    span = np.minimum(np.abs(frame.s[i] - frame.s[j]), prof.length)
    rhs = 2 * bounds_k[None, :] * span[:, None]
    margin = rhs - diff
    return {"pairs": n_pairs, "min_margin": float(margin.min()),
            "holds": bool(np.all(margin >= -1e-12)), "k": bounds_k.tolist()}


# --------------------------------------------------------------------------
# tube map and metric
# --------------------------------------------------------------------------

def tube_map(frame: FrameField, s, t) -> np.ndarray:
    """``Gamma(s) + t_mu R_{mu nu}(s) e_nu(s)`` for arrays of ``s`` and ``t = (t2, t3)``."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    t = np.atleast_2d(np.asarray(t, dtype=float))
    g, e = frame.at(s)
    nrm = _rotated(e, frame.profile.theta(s))
    return g + t[:, 0:1] * nrm[:, 0] + t[:, 1:2] * nrm[:, 1]


@dataclass(frozen=True, eq=False)
class MetricSample:
    h: np.ndarray
    h2: np.ndarray
    h3: np.ndarray
    G: np.ndarray
    Ginv: np.ndarray
    dF: np.ndarray

    @property
    def det(self) -> np.ndarray:
        return self.h ** 2


def metric_at(profile: CurvatureProfile, s, t) -> MetricSample:
    """Metric of the tube in the coordinates ``(s, t2, t3)``, its inverse and ``grad F``.

    ``F = log(det G)/4 = log(h)/2``.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    t2, t3 = t[..., 0], t[..., 1]
    k1, dk1 = profile.kappa1(s), profile.dkappa1(s)
    th, dth = profile.theta(s), profile.dtheta(s)
    rho = profile.kappa2(s) - dth
    c, sn = np.cos(th), np.sin(th)
    proj = t2 * c + t3 * sn
    h = 1.0 - proj * k1
    if np.any(h <= 0):
        raise ImmersionError("h <= 0: the tube map is not an immersion here")
    h2 = -t3 * rho
    h3 = t2 * rho
    shape = np.broadcast(h, h2).shape
    G = np.zeros(shape + (3, 3))
    G[..., 0, 0] = h ** 2 + h2 ** 2 + h3 ** 2
    G[..., 0, 1] = G[..., 1, 0] = h2
    G[..., 0, 2] = G[..., 2, 0] = h3
    G[..., 1, 1] = G[..., 2, 2] = 1.0
    ih2 = 1.0 / h ** 2
    Ginv = np.zeros_like(G)
    Ginv[..., 0, 0] = ih2
    Ginv[..., 0, 1] = Ginv[..., 1, 0] = -h2 * ih2
    Ginv[..., 0, 2] = Ginv[..., 2, 0] = -h3 * ih2
    Ginv[..., 1, 1] = 1.0 + h2 * h2 * ih2
    Ginv[..., 2, 2] = 1.0 + h3 * h3 * ih2
    Ginv[..., 1, 2] = Ginv[..., 2, 1] = h2 * h3 * ih2
    dh1 = -proj * dk1 - (t3 * c - t2 * sn) * dth * k1
    dF = np.stack([dh1 / (2 * h), -c * k1 / (2 * h), -sn * k1 / (2 * h)], axis=-1)
    return MetricSample(h=h, h2=h2, h3=h3, G=G, Ginv=Ginv, dF=dF)


def ellipticity_bounds(profile: CurvatureProfile, a: float) -> tuple[float, float]:
    """``(1 - a|kappa1|, 1 + a|kappa1|)``, the range of ``h`` over the tube."""
    ak = a * profile.norms["kappa1"]
    if ak >= 1.0:
        raise ImmersionError(f"a*|kappa1| = {ak:.6g} >= 1: immersion violated")
    return (1.0 - ak, 1.0 + ak)


# --------------------------------------------------------------------------
# injectivity
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class InjectivityReport:
    immersion_ok: bool
    a_kappa1: float
    k: tuple[float, float, float]
    criterion_value: float
    criterion_ok: bool
    scan_min_distance: float | None = None
    scan_spacing: float | None = None
    scan_overlap: bool | None = None

    @property
    def status(self) -> str:
        if not self.immersion_ok:
            return "FAIL"
        return "PASS" if self.criterion_ok else "INCONCLUSIVE"


def check_injectivity(profile: CurvatureProfile, a: float, scan: bool = False,
                      shape=None, scan_ds: float = 0.05, separation: float | None = None
                      ) -> InjectivityReport:
    """Sufficient conditions for the tube map to be injective.

    The bound ``max(4|I|^2 |k1|^2, 4a(|k1| + |k2|)) < 1`` certifies
    injectivity; failing it is inconclusive.  With ``scan=True`` cross-section
    point clouds at arclengths further apart than ``separation`` are compared.
    """
    n1, n2 = profile.norms["kappa1"], profile.norms["kappa2"]
    prop = max(4 * profile.length ** 2 * n1 ** 2, 4 * a * (n1 + n2))
    rep = dict(immersion_ok=bool(a * n1 < 1.0), a_kappa1=a * n1, k=(n1, n1 + n2, n2),
               criterion_value=prop, criterion_ok=bool(prop < 1.0))
    if scan:
        rep.update(_overlap_scan(profile, a, shape, scan_ds, separation))
    return InjectivityReport(**rep)


def _overlap_scan(profile, a, shape, ds, separation):
    sa, sb = profile.support
    pad = 4 * a + ds
    frame = integrate_frame(profile, extend=(sa - pad, sb + pad))
    s = np.arange(sa - pad, sb + pad + 0.5 * ds, ds)
    if shape is not None:
        pts2 = shape.boundary(48)
    else:
        phi = 2 * np.pi * np.arange(48) / 48
        pts2 = a * np.column_stack([np.cos(phi), np.sin(phi)])
    clouds = []
    for sk in s:
        clouds.append(tube_map(frame, np.full(len(pts2), sk), pts2))
    xyz = np.vstack(clouds)
    owner = np.repeat(s, len(pts2))
    sep = 4 * a if separation is None else separation
    tree = cKDTree(xyz)
    d, idx = tree.query(xyz, k=min(64, len(xyz)))
    far = np.abs(owner[idx] - owner[:, None]) >= sep
    d = np.where(far, d, np.inf)
    dmin = float(d.min()) if np.isfinite(d).any() else math.inf
    spacing = max(ds, float(np.max(np.linalg.norm(np.diff(pts2, axis=0), axis=1))))
    return {"scan_min_distance": dmin, "scan_spacing": spacing, "scan_overlap": bool(dmin < spacing)}


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------

def tube_surface_mesh(frame: FrameField, shape, s_values, n_boundary: int = 64):
    """Vertices and triangle faces (1-based) of the boundary of omega swept along the tube."""
    pts2 = shape.boundary(n_boundary)
    nb = len(pts2)
    s_values = np.asarray(s_values, dtype=float)
    verts = np.vstack([tube_map(frame, np.full(nb, sk), pts2) for sk in s_values])
    faces = []
    for k in range(len(s_values) - 1):
        for j in range(nb):
            a = k * nb + j
            b = k * nb + (j + 1) % nb
            c = a + nb
            d = b + nb
            faces.append((a + 1, b + 1, d + 1))
            faces.append((a + 1, d + 1, c + 1))
    return verts, np.asarray(faces, dtype=np.int64)


def write_obj(path, vertices, faces) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for v in vertices:
            fh.write("v " + " ".join(repr(float(x)) for x in v) + "\n")
        for f in faces:
            fh.write("f " + " ".join(str(int(i)) for i in f) + "\n")


def frame_table(frame: FrameField) -> tuple[list[str], np.ndarray]:
    """Header and rows ``s, Gamma, e1, e2, e3`` for CSV export."""
    header = ["s", "gamma_x", "gamma_y", "gamma_z"] + [f"e{i}_{c}" for i in (1, 2, 3)
                                                      for c in "xyz"]
    rows = np.column_stack([frame.s, frame.gamma, frame.e.reshape(len(frame.s), 9)])
    return header, rows
