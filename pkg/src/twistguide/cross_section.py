"""Planar cross-sections: rasterisation, Dirichlet ground pair, angular derivative, lambda.

The cross-section is sampled on the lattice ``(i*delta, j*delta)`` anchored at the
origin, so the rotation axis of the angular derivative always sits on a node.
Interior nodes are those strictly inside the shape.  Neighbours falling outside
are handled by a linear ghost value ``u_ghost = u_P (1 - delta/d)``, where ``d``
is the distance from the node to the boundary along the lattice direction.  For
grid-aligned boundaries (``d == delta``) this is plain zero extension.  The
resulting 5-point operator is symmetric and second-order accurate on curved
boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import minimize_scalar

from .errors import (
    DegenerateDiscretizationError,
    DegenerateGroundStateError,
    EigensolverError,
)

# direction order used by every per-node neighbour table: +t2, -t2, +t3, -t3
_DIRS = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]])
_DENSE_LIMIT = 600
_DEGENERACY_GAP = 1e-8
_MIN_BOUNDARY_FRACTION = 1e-3


# --------------------------------------------------------------------------
# shapes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Rectangle:
    width: float
    height: float
    center: tuple[float, float] = (0.0, 0.0)
    kind: str = field(default="rectangle", init=False)

    def contains(self, x, y):
        cx, cy = self.center
        tol = 1e-12 * max(self.width, self.height)
        return (np.abs(x - cx) < 0.5 * self.width - tol) & (np.abs(y - cy) < 0.5 * self.height - tol)

    def area(self):
        return self.width * self.height

    def radius(self):
        cx, cy = self.center
        return max(math.hypot(cx + sx * 0.5 * self.width, cy + sy * 0.5 * self.height)
                   for sx in (-1, 1) for sy in (-1, 1))

    def boundary(self, n=64):
        cx, cy = self.center
        w, h = 0.5 * self.width, 0.5 * self.height
        corners = np.array([[cx - w, cy - h], [cx + w, cy - h], [cx + w, cy + h], [cx - w, cy + h]])
        return _densify(corners, n)

    def to_dict(self):
        return {"shape": "rectangle", "width": self.width, "height": self.height,
                "center": list(self.center)}


@dataclass(frozen=True)
class Disk:
    r: float
    center: tuple[float, float] = (0.0, 0.0)
    kind: str = field(default="disk", init=False)

    def contains(self, x, y):
        cx, cy = self.center
        return (x - cx) ** 2 + (y - cy) ** 2 < self.r ** 2 * (1.0 - 1e-12)

    def area(self):
        return math.pi * self.r ** 2

    def radius(self):
        return math.hypot(*self.center) + self.r

    def boundary(self, n=64):
        phi = 2 * np.pi * np.arange(n) / n
        return np.column_stack([self.center[0] + self.r * np.cos(phi),
                                self.center[1] + self.r * np.sin(phi)])

    def to_dict(self):
        return {"shape": "disk", "r": self.r, "center": list(self.center)}


@dataclass(frozen=True)
class Ellipse:
    rx: float
    ry: float
    center: tuple[float, float] = (0.0, 0.0)
    kind: str = field(default="ellipse", init=False)

    def contains(self, x, y):
        cx, cy = self.center
        return ((x - cx) / self.rx) ** 2 + ((y - cy) / self.ry) ** 2 < 1.0 - 1e-12

    def area(self):
        return math.pi * self.rx * self.ry

    def radius(self):
        cx, cy = self.center

        def neg_norm(phi):
            return -math.hypot(cx + self.rx * math.cos(phi), cy + self.ry * math.sin(phi))

        phis = np.linspace(0.0, 2 * np.pi, 721)
        vals = [neg_norm(p) for p in phis]
        k = int(np.argmin(vals))
        step = phis[1] - phis[0]
        res = minimize_scalar(neg_norm, bounds=(phis[k] - step, phis[k] + step),
                              method="bounded", options={"xatol": 1e-13})
        return max(-res.fun, -vals[k])

    def boundary(self, n=64):
        phi = 2 * np.pi * np.arange(n) / n
        return np.column_stack([self.center[0] + self.rx * np.cos(phi),
                                self.center[1] + self.ry * np.sin(phi)])

    def to_dict(self):
        return {"shape": "ellipse", "rx": self.rx, "ry": self.ry, "center": list(self.center)}


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[tuple[float, float], ...]
    kind: str = field(default="polygon", init=False)

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(tuple(map(float, v)) for v in self.vertices))

    def _arr(self):
        return np.asarray(self.vertices, dtype=float)

    def contains(self, x, y):
        v = self._arr()
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        scale = np.ptp(v, axis=0).max()
        near = np.zeros_like(inside)
        for (x0, y0), (x1, y1) in zip(v, np.roll(v, -1, axis=0)):
            crosses = (y0 > y) != (y1 > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            inside ^= crosses & (x < xint)
            # distance to the edge, to exclude points on the boundary
            ex, ey = x1 - x0, y1 - y0
            tt = np.clip(((x - x0) * ex + (y - y0) * ey) / (ex * ex + ey * ey), 0.0, 1.0)
            dist = np.hypot(x - (x0 + tt * ex), y - (y0 + tt * ey))
            near |= dist < 1e-12 * scale
        return inside & ~near

    def area(self):
        v = self._arr()
        return 0.5 * abs(np.dot(v[:, 0], np.roll(v[:, 1], -1)) - np.dot(v[:, 1], np.roll(v[:, 0], -1)))

    def radius(self):
        return float(np.hypot(*self._arr().T).max())

    def boundary(self, n=64):
        return _densify(self._arr(), n)

    def to_dict(self):
        return {"shape": "polygon", "vertices": [list(v) for v in self.vertices]}


def _densify(corners, n):
    """Closed polyline through ``corners`` with roughly ``n`` points."""
    per_edge = max(1, n // len(corners))
    pts = []
    for p, q in zip(corners, np.roll(corners, -1, axis=0)):
        s = np.arange(per_edge) / per_edge
        pts.append(p[None, :] + s[:, None] * (q - p)[None, :])
    return np.vstack(pts)


Shape = Rectangle | Disk | Ellipse | Polygon


def shape_from_dict(d: dict) -> Shape:
    """Build a shape from a descriptor such as ``{"shape": "disk", "r": 1.0}``."""
    kind = d["shape"]
    center = tuple(d.get("center", (0.0, 0.0)))
    if kind == "rectangle":
        return Rectangle(float(d["width"]), float(d["height"]), center)
    if kind == "disk":
        return Disk(float(d["r"]), center)
    if kind == "ellipse":
        return Ellipse(float(d["rx"]), float(d["ry"]), center)
    if kind == "polygon":
        return Polygon(tuple(tuple(v) for v in d["vertices"]))
    raise ValueError(f"unknown shape {kind!r}")


# --------------------------------------------------------------------------
# rasterised domain
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CrossSectionDomain:
    """Interior lattice nodes of a planar shape.

    ``ij`` holds integer lattice coordinates in lexicographic order, ``points``
    the physical coordinates ``(t2, t3)``.  ``neighbors[n, k]`` is the index of
    the neighbour in direction ``_DIRS[k]`` or -1, in which case
    ``boundary_distance[n, k]`` is the distance to the boundary along that
    direction (otherwise it equals ``delta``).
    """

    shape: Shape
    delta: float
    ij: np.ndarray
    points: np.ndarray
    neighbors: np.ndarray
    boundary_distance: np.ndarray
    radius: float
    boundary: str = "ghost"

    @property
    def n(self) -> int:
        return len(self.ij)

    @property
    def cell_area(self) -> float:
        return self.delta ** 2

    @property
    def mass(self) -> np.ndarray:
        """Lumped quadrature weights, see :func:`mass_weights`."""
        return mass_weights(self)

    def index_of(self, i: int, j: int) -> int:
        hits = np.flatnonzero((self.ij[:, 0] == i) & (self.ij[:, 1] == j))
        return int(hits[0]) if hits.size else -1

    def inner(self, f, g) -> float:
        """Discrete L2(omega) inner product."""
        return float(np.dot(self.mass * f, g))


def build_domain(shape: Shape, delta: float, boundary: str = "ghost") -> CrossSectionDomain:
    """Rasterise ``shape`` on the origin-anchored lattice of spacing ``delta``.

    ``boundary="ghost"`` measures the true distance to the boundary for every
    missing neighbour; ``boundary="zero"`` pretends it is one full step away
    (pure zero extension, staircase boundary).
    """
    if not delta > 0:
        raise ValueError("grid spacing must be positive")
    if not shape.area() > 0:
        raise ValueError("shape must have positive area")
    if boundary not in ("ghost", "zero"):
        raise ValueError("boundary must be 'ghost' or 'zero'")

    pts = shape.boundary(256)
    lo = np.floor(pts.min(axis=0) / delta).astype(int) - 1
    hi = np.ceil(pts.max(axis=0) / delta).astype(int) + 1
    ii, jj = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1), indexing="ij")
    mask = shape.contains(ii * delta, jj * delta)
    if not mask.any():
        raise DegenerateDiscretizationError(
            f"degenerate discretization: no interior node at delta={delta}")
    ij = np.column_stack([ii[mask], jj[mask]])  # meshgrid 'ij' order is lexicographic
    n = len(ij)

    lookup = -np.ones(ii.shape, dtype=np.int64)
    lookup[mask] = np.arange(n)
    neighbors = -np.ones((n, 4), dtype=np.int64)
    for k, (di, dj) in enumerate(_DIRS):
        a = ij[:, 0] + di - lo[0]
        b = ij[:, 1] + dj - lo[1]
        neighbors[:, k] = lookup[a, b]

    dist = np.full((n, 4), float(delta))
    if boundary == "ghost":
        miss_n, miss_k = np.nonzero(neighbors < 0)
        if miss_n.size:
            start = ij[miss_n] * delta
            step = _DIRS[miss_k] * delta
            dist[miss_n, miss_k] = _exit_distance(shape, start, step) * delta
    points = ij * delta
    return CrossSectionDomain(shape=shape, delta=float(delta), ij=ij, points=points.astype(float),
                              neighbors=neighbors, boundary_distance=dist,
                              radius=float(shape.radius()), boundary=boundary)


def _exit_distance(shape, start, step, iters=60):
    """Fraction ``s`` in (0, 1] where ``start + s*step`` first leaves ``shape`` (bisection)."""
    lo = np.zeros(len(start))
    hi = np.ones(len(start))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        p = start + mid[:, None] * step
        inside = shape.contains(p[:, 0], p[:, 1])
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    frac = hi
    frac[np.abs(frac - 1.0) < 1e-10] = 1.0
    return np.maximum(frac, _MIN_BOUNDARY_FRACTION)


# --------------------------------------------------------------------------
# operators
# --------------------------------------------------------------------------

def mass_weights(domain: CrossSectionDomain) -> np.ndarray:
    """Lumped mass per node: the node's dual cell, stretched to the wall at boundary nodes.

    With these weights the cells of a grid-aligned rectangle tile it exactly, and
    first-derivative energies see the strip between the last nodes and the wall.
    """
    ext = np.where(domain.neighbors >= 0, 0.5 * domain.delta, domain.boundary_distance)
    return (ext[:, 0] + ext[:, 1]) * (ext[:, 2] + ext[:, 3])


def mass_matrix(domain: CrossSectionDomain) -> sp.csr_matrix:
    return sp.diags(mass_weights(domain)).tocsr()


def stiffness_matrix(domain: CrossSectionDomain) -> sp.csr_matrix:
    """Dirichlet form ``int |grad f|^2`` as a symmetric matrix.

    Equal to ``delta**2`` times the 5-point ``-Delta`` with ghost values.
    """
    n, d = domain.n, domain.delta
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    for k in range(4):
        nb = domain.neighbors[:, k]
        has = nb >= 0
        rows.append(np.flatnonzero(has))
        cols.append(nb[has])
        vals.append(np.full(has.sum(), -1.0))
        diag += np.where(has, 1.0, d / domain.boundary_distance[:, k])
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n))


def laplacian_matrix(domain: CrossSectionDomain) -> sp.csr_matrix:
    """The 5-point ``-Delta`` in operator units (row scaling of the stiffness by ``delta**-2``)."""
    return (stiffness_matrix(domain) / domain.delta ** 2).tocsr()


@dataclass(frozen=True, eq=False)
class EdgeOperator:
    """Transverse gradient sampled on lattice edges.

    ``diff @ f`` is the one-sided derivative across each edge, ``avg @ f`` the
    edge average (zero outside omega), ``weight`` the quadrature weight, so that
    ``diff.T @ diag(weight) @ diff == delta**2 * laplacian_matrix(domain)``.
    ``axis`` is 0 for t2-edges and 1 for t3-edges.
    """

    diff: sp.csr_matrix
    avg: sp.csr_matrix
    weight: np.ndarray
    midpoint: np.ndarray
    axis: np.ndarray


def edge_operator(domain: CrossSectionDomain) -> EdgeOperator:
    d = domain.delta
    n = domain.n
    rows_d, cols_d, vals_d = [], [], []
    rows_a, cols_a, vals_a = [], [], []
    weight, mid, axis = [], [], []
    e = 0
    for k, (di, dj) in enumerate(_DIRS):
        nb = domain.neighbors[:, k]
        ax = 0 if di != 0 else 1
        sgn = di + dj
        # interior edges counted once, from the node on the negative side
        if sgn > 0:
            own = np.flatnonzero(nb >= 0)
            m = len(own)
            ids = np.arange(e, e + m)
            rows_d += [ids, ids]
            cols_d += [own, nb[own]]
            vals_d += [np.full(m, -1.0 / d), np.full(m, 1.0 / d)]
            rows_a += [ids, ids]
            cols_a += [own, nb[own]]
            vals_a += [np.full(m, 0.5), np.full(m, 0.5)]
            weight.append(np.full(m, d * d))
            mid.append(domain.points[own] + 0.5 * d * _DIRS[k])
            axis.append(np.full(m, ax))
            e += m
        # half-edges from a node to the boundary
        own = np.flatnonzero(nb < 0)
        m = len(own)
        ids = np.arange(e, e + m)
        bd = domain.boundary_distance[own, k]
        rows_d.append(ids)
        cols_d.append(own)
        vals_d.append(-sgn / bd)
        rows_a.append(ids)
        cols_a.append(own)
        vals_a.append(np.full(m, 0.5))
        weight.append(d * bd)
        mid.append(domain.points[own] + 0.5 * bd[:, None] * _DIRS[k])
        axis.append(np.full(m, ax))
        e += m
    diff = sp.csr_matrix((np.concatenate(vals_d), (np.concatenate(rows_d), np.concatenate(cols_d))),
                         shape=(e, n))
    avg = sp.csr_matrix((np.concatenate(vals_a), (np.concatenate(rows_a), np.concatenate(cols_a))),
                        shape=(e, n))
    return EdgeOperator(diff, avg, np.concatenate(weight), np.vstack(mid), np.concatenate(axis))


def angular_derivative_matrix(domain: CrossSectionDomain) -> sp.csr_matrix:
    """Centred-difference ``t3 d/dt2 - t2 d/dt3`` with the same ghost values as the Laplacian."""
    n, d = domain.n, domain.delta
    t2, t3 = domain.points[:, 0], domain.points[:, 1]
    # coefficient multiplying the value in direction k
    coef = np.column_stack([t3, -t3, -t2, t2]) / (2 * d)
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    for k in range(4):
        nb = domain.neighbors[:, k]
        has = nb >= 0
        rows.append(np.flatnonzero(has))
        cols.append(nb[has])
        vals.append(coef[has, k])
        ghost = 1.0 - d / domain.boundary_distance[:, k]
        diag += np.where(has, 0.0, coef[:, k] * ghost)
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(n, n))
    mat.eliminate_zeros()
    return mat


# --------------------------------------------------------------------------
# eigenpairs
# --------------------------------------------------------------------------

def _lowest_generalized(stiff, mass, k, sigma):
    """``k`` smallest pairs of ``stiff v = lam diag(mass) v`` with ``v.T diag(mass) v = 1``."""
    scale = sp.diags(1.0 / np.sqrt(mass))
    vals, vecs = _lowest_eigenpairs((scale @ stiff @ scale).tocsr(), k, sigma)
    return vals, vecs / np.sqrt(mass)[:, None]


def _lowest_eigenpairs(mat, k, sigma):
    """``k`` smallest eigenpairs of a symmetric matrix known to lie above ``sigma``."""
    mat = ((mat + mat.T) * 0.5).tocsr()
    n = mat.shape[0]
    if n <= _DENSE_LIMIT or k >= n - 1:
        vals, vecs = sla.eigh(mat.toarray(), subset_by_index=[0, min(k, n) - 1])
        return vals, vecs
    v0 = np.ones(n)
    try:
        vals, vecs = spla.eigsh(mat.tocsc(), k=k, sigma=sigma, which="LM", v0=v0, tol=0.0)
    except spla.ArpackNoConvergence as exc:
        res = [float(np.linalg.norm(mat @ v - lam * v)) for lam, v in
               zip(exc.eigenvalues, exc.eigenvectors.T)]
        raise EigensolverError("ARPACK did not converge", residuals=res) from exc
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


@dataclass(frozen=True, eq=False)
class TransverseGroundPair:
    E1: float
    J1: np.ndarray
    delta: float
    E2: float = math.inf

    @property
    def gap(self) -> float:
        return self.E2 - self.E1

    @property
    def degenerate(self) -> bool:
        return self.gap < _DEGENERACY_GAP


def _fix_sign(domain, vec):
    centroid = domain.points.mean(axis=0)
    k = int(np.argmin(np.hypot(*(domain.points - centroid).T)))
    return vec if vec[k] >= 0 else -vec


def dirichlet_ground_pair(domain: CrossSectionDomain) -> TransverseGroundPair:
    """Lowest eigenvalue and positive, L2-normalised eigenvector of the Dirichlet Laplacian."""
    k = min(2, domain.n)
    vals, vecs = _lowest_generalized(stiffness_matrix(domain), domain.mass, k, sigma=0.0)
    j1 = _fix_sign(domain, vecs[:, 0])
    j1 = j1 / math.sqrt(domain.inner(j1, j1))
    e2 = float(vals[1]) if len(vals) > 1 else math.inf
    return TransverseGroundPair(E1=float(vals[0]), J1=j1, delta=domain.delta, E2=e2)


def transverse_modes(domain: CrossSectionDomain, m: int) -> tuple[np.ndarray, np.ndarray]:
    """The ``m`` lowest Dirichlet eigenpairs, normalised so that ``Phi.T @ diag(mass) @ Phi = I``."""
    m = min(m, domain.n)
    vals, vecs = _lowest_generalized(stiffness_matrix(domain), domain.mass, m, sigma=0.0)
    vecs[:, 0] = _fix_sign(domain, vecs[:, 0])
    return vals, vecs


@dataclass(frozen=True, eq=False)
class LambdaResult:
    lam: float
    vector: np.ndarray
    history: list[tuple[float, float]]
    asymmetry: float = 0.0


def lambda_operator(domain: CrossSectionDomain, E1: float) -> sp.csr_matrix:
    """Form matrix of ``|grad f|^2 - E1 |f|^2 + |D_tau f|^2``; pair it with ``diag(mass)``."""
    mass = sp.diags(domain.mass)
    dtau = angular_derivative_matrix(domain)
    return (stiffness_matrix(domain) - E1 * mass + dtau.T @ mass @ dtau).tocsr()


def compute_lambda(domain: CrossSectionDomain,
                   ground: TransverseGroundPair | None = None) -> LambdaResult:
    """Lowest eigenvalue of the shifted transverse operator with the angular penalty."""
    ground = ground if ground is not None else dirichlet_ground_pair(domain)
    if ground.degenerate:
        raise DegenerateGroundStateError(
            f"ground state not simple: E2 - E1 = {ground.gap:.3e}")
    b = lambda_operator(domain, ground.E1)
    asym = abs(b - b.T).max() if b.nnz else 0.0
    b = ((b + b.T) * 0.5).tocsr()
    vals, vecs = _lowest_generalized(b, domain.mass, 1, sigma=-1.0)
    vec = _fix_sign(domain, vecs[:, 0])
    vec = vec / math.sqrt(domain.inner(vec, vec))
    lam = float(vals[0])
    return LambdaResult(lam=lam, vector=vec, history=[(domain.delta, lam)], asymmetry=float(asym))


def lambda_refinement(shape: Shape, deltas: Sequence[float], boundary: str = "ghost") -> LambdaResult:
    """``compute_lambda`` over a sequence of grids; the result is that of the last grid."""
    history = []
    res = None
    for d in deltas:
        res = compute_lambda(build_domain(shape, d, boundary=boundary))
        history.append((float(d), res.lam))
    return LambdaResult(lam=res.lam, vector=res.vector, history=history, asymmetry=res.asymmetry)


# --------------------------------------------------------------------------
# rotational symmetry
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetryReport:
    is_symmetric_for_all_alpha: bool
    witness_alpha: float | None
    difference_areas: tuple[float, ...]
    alphas: tuple[float, ...]
    area: float
    tolerance: float

    @property
    def satisfies_nonsymmetry(self) -> bool:
        return not self.is_symmetric_for_all_alpha


def check_rotational_symmetry(shape_or_domain, alphas: Sequence[float], tol: float = 1e-3,
                              resolution: int = 400) -> SymmetryReport:
    """Area of ``omega`` xor its rotation by each angle, on a fine raster.

    The rotation is ``t -> (t_mu R_{mu 2}, t_mu R_{mu 3})``.  The shape counts as
    non-symmetric as soon as one difference area exceeds ``tol * area``.
    """
    shape = getattr(shape_or_domain, "shape", shape_or_domain)
    alphas = tuple(float(a) for a in alphas)
    if not alphas or any(not (0.0 < a < 2 * np.pi) for a in alphas):
        raise ValueError("angles must lie in (0, 2*pi)")
    a = shape.radius()
    h = 2 * a / resolution
    g = (np.arange(resolution) + 0.5) * h - a
    x, y = np.meshgrid(g, g, indexing="ij")
    base = shape.contains(x, y)
    area = shape.area()
    diffs = []
    for alpha in alphas:
        c, s = math.cos(alpha), math.sin(alpha)
        # p lies in the rotated set iff its preimage under the rotation lies in omega
        xr = c * x - s * y
        yr = s * x + c * y
        rotated = shape.contains(xr, yr)
        diffs.append(float(np.count_nonzero(base ^ rotated)) * h * h)
    witness = None
    for alpha, da in zip(alphas, diffs):
        if da > tol * area:
            witness = alpha
            break
    return SymmetryReport(is_symmetric_for_all_alpha=witness is None, witness_alpha=witness,
                          difference_areas=tuple(diffs), alphas=alphas, area=area, tolerance=tol)
