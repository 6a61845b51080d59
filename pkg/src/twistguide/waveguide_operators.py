"""Quadratic forms of twisted and bent tubes on a truncated longitudinal grid.

Unknowns live on cross-sectional slabs ``s_k = -L + k*ds``.  Within a slab a
function is expanded either in the lowest ``m`` discrete transverse Dirichlet
modes or in the nodal basis.  Longitudinal derivatives sit on the edges
between slabs, with the slab-average used for the transverse factors, so each
form is an exact sum of squares and the assembled matrix is block
tridiagonal.  On straight, untwisted slabs and edges the blocks reduce
analytically to the separable ones, which keeps the discrete threshold equal to
the lowest transverse eigenvalue.

Ends are either Dirichlet or transparent.  Transparent ends fold the exact
discrete response of the straight semi-infinite tails into the end slabs; the
resulting spectral problems become nonlinear in the eigenvalue and are solved
by bracketing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .cross_section import (
    CrossSectionDomain,
    angular_derivative_matrix,
    edge_operator,
    stiffness_matrix,
    _lowest_generalized,
)
from .curve_geometry import CurvatureProfile, metric_at
from .errors import ConfigurationError, EigensolverError

_CLUSTER_GAP = 1e-8
_FAR_FACTOR = 40.0


# --------------------------------------------------------------------------
# transverse basis
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TransverseBasis:
    """Slab basis ``phi`` (nodes x m) with ``phi.T diag(mass) phi = diag(gram)``."""

    domain: CrossSectionDomain
    phi: np.ndarray
    gram: np.ndarray
    stiffness: np.ndarray
    energies: np.ndarray | None
    dtau_phi: np.ndarray
    diff_phi: np.ndarray
    avg_phi: np.ndarray
    edge_weight: np.ndarray
    edge_mid: np.ndarray
    edge_axis: np.ndarray
    E1: float

    @property
    def m(self) -> int:
        return self.phi.shape[1]

    @property
    def is_modal(self) -> bool:
        return self.energies is not None


def transverse_basis(domain: CrossSectionDomain, modes: int | None = 40) -> TransverseBasis:
    """Mode basis with ``modes`` functions (rounded up to close a degenerate cluster),
    or the nodal basis when ``modes`` is None."""
    K = stiffness_matrix(domain)
    mass = domain.mass
    eo = edge_operator(domain)
    # E1 is always the exact discrete threshold
    n_req = domain.n if modes is None else min(domain.n, modes + 4)
    vals, vecs = _lowest_generalized(K, mass, max(2, min(n_req, domain.n)) if domain.n > 1 else 1,
                                     sigma=-1.0)
    E1 = float(vals[0])
    if modes is None:
        phi = np.eye(domain.n)
        gram = mass.copy()
        energies = None
        kmat = K.toarray()
    else:
        m = min(modes, len(vals))
        while m < len(vals) and vals[m] - vals[m - 1] < _CLUSTER_GAP * max(1.0, abs(vals[m])):
            m += 1
        if m == len(vals) and m < domain.n and modes < domain.n:
            vals, vecs = _lowest_generalized(K, mass, min(domain.n, m + 8), sigma=-1.0)
            while m < len(vals) and vals[m] - vals[m - 1] < _CLUSTER_GAP * max(1.0, abs(vals[m])):
                m += 1
        phi = vecs[:, :m]
        if phi[np.argmax(np.abs(phi[:, 0])), 0] < 0:
            phi[:, 0] = -phi[:, 0]
        gram = np.ones(m)
        energies = np.asarray(vals[:m], dtype=float)
        kmat = np.diag(energies)
    dtau = angular_derivative_matrix(domain)
    return TransverseBasis(domain=domain, phi=phi, gram=gram, stiffness=kmat, energies=energies,
                           dtau_phi=np.asarray(dtau @ phi), diff_phi=np.asarray(eo.diff @ phi),
                           avg_phi=np.asarray(eo.avg @ phi), edge_weight=eo.weight,
                           edge_mid=eo.midpoint, edge_axis=eo.axis, E1=E1)


# --------------------------------------------------------------------------
# grid and forms
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TruncatedTubeGrid:
    """Slabs at ``s = -L + k ds``, ``k = 1 .. N-1``, over a transverse basis."""

    basis: TransverseBasis
    L: float
    ds: float
    ends: str = "dirichlet"

    @property
    def domain(self) -> CrossSectionDomain:
        return self.basis.domain

    @property
    def n_intervals(self) -> int:
        return int(round(2 * self.L / self.ds))

    @property
    def s(self) -> np.ndarray:
        return -self.L + self.ds * np.arange(1, self.n_intervals)

    @property
    def s_edges(self) -> np.ndarray:
        """Edge midpoints, including the two edges touching the ends."""
        return -self.L + self.ds * (np.arange(self.n_intervals) + 0.5)

    @property
    def n_slabs(self) -> int:
        return self.n_intervals - 1

    @property
    def dof(self) -> int:
        return self.n_slabs * self.basis.m


def make_tube_grid(domain: CrossSectionDomain, L: float, ds: float, ends: str = "dirichlet",
                   modes: int | None = 40, support: tuple[float, float] | None = None,
                   margin: float = 2.0, basis: TransverseBasis | None = None) -> TruncatedTubeGrid:
    """Check the truncation against the support of the coefficients and build the grid."""
    if not (L > 0 and ds > 0):
        raise ConfigurationError("L and ds must be positive")
    if abs(2 * L / ds - round(2 * L / ds)) > 1e-9 * (2 * L / ds):
        raise ConfigurationError("2L must be an integer multiple of ds")
    if ends not in ("dirichlet", "transparent"):
        raise ConfigurationError("ends must be 'dirichlet' or 'transparent'")
    if support is not None:
        lo, hi = support
        if lo <= -L + margin or hi >= L - margin:
            raise ConfigurationError(
                f"coefficient support ({lo:g}, {hi:g}) must lie in (-L+{margin:g}, L-{margin:g}) "
                f"for L={L:g}")
    basis = basis if basis is not None else transverse_basis(domain, modes)
    if ends == "transparent" and not basis.is_modal:
        raise ConfigurationError("transparent ends need the transverse mode basis")
    return TruncatedTubeGrid(basis=basis, L=float(L), ds=float(ds), ends=ends)


@dataclass(frozen=True, eq=False)
class SymmetricForm:
    """Block-tridiagonal form ``A`` with block-diagonal mass ``M`` over a tube grid.

    ``diag[k]`` and ``off[k]`` (coupling slab k to k+1) are dense ``m x m`` blocks;
    the mass of slab k is ``ds * diag(grid.basis.gram)``.
    """

    grid: TruncatedTubeGrid
    diag: np.ndarray
    off: np.ndarray
    E1: float
    kind: str = ""
    warnings: tuple[str, ...] = ()

    @property
    def m(self) -> int:
        return self.diag.shape[1]

    @property
    def mass_diag(self) -> np.ndarray:
        return np.tile(self.grid.ds * self.grid.basis.gram, self.grid.n_slabs)

    @property
    def A(self) -> sp.csr_matrix:
        n, m = self.diag.shape[0], self.m
        ii, jj = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
        base = (np.arange(n) * m)[:, None, None]
        rows = [(base + ii).ravel()]
        cols = [(base + jj).ravel()]
        vals = [self.diag.ravel()]
        if n > 1:
            lo = base[:-1]
            rows += [(lo + m + ii).ravel(), (lo + jj).ravel()]
            cols += [(lo + jj).ravel(), (lo + m + ii).ravel()]
            vals += [self.off.ravel(), self.off.ravel()]
        N = n * m
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(N, N))

    @property
    def M(self) -> sp.csr_matrix:
        return sp.diags(self.mass_diag).tocsr()

    def energy(self, psi: np.ndarray) -> float:
        """``psi.T A psi`` using the block structure."""
        c = psi.reshape(self.diag.shape[0], self.m)
        val = np.einsum("ki,kij,kj->", c, self.diag, c)
        val += 2 * np.einsum("ki,kij,kj->", c[1:], self.off, c[:-1])
        return float(val)

    def banded(self, shift: float = 0.0, scale: np.ndarray | None = None,
               end_terms: np.ndarray | None = None) -> np.ndarray:
        """Lower banded storage of ``S (A - shift M + T) S`` with ``S = diag(scale)``."""
        n, m = self.diag.shape[0], self.m
        N = n * m
        bw = 2 * m - 1
        ab = np.zeros((bw + 1, N))
        d = self.diag.copy()
        d -= shift * self.grid.ds * np.diag(self.grid.basis.gram)[None, :, :]
        if end_terms is not None:
            d[0] += np.diag(end_terms[0])
            d[-1] += np.diag(end_terms[1])
        sc = np.ones(N) if scale is None else scale
        scb = sc.reshape(n, m)
        d = d * scb[:, :, None] * scb[:, None, :]
        o = self.off * scb[1:, :, None] * scb[:-1, None, :]
        # diagonal blocks: entries (k*m+i, k*m+j) with i >= j
        for i in range(m):
            for j in range(i + 1):
                ab[i - j, np.arange(n) * m + j] = d[:, i, j]
        # off blocks: row (k+1)*m + i, column k*m + j, offset m + i - j
        for i in range(m):
            for j in range(m):
                ab[m + i - j, np.arange(n - 1) * m + j] = o[:, i, j]
        return ab


def _edge_blocks(basis: TransverseBasis, w: np.ndarray | None, c_rot: float,
                 f1: np.ndarray | None, ds: float):
    """Local 2m x 2m blocks of ``ds * sum_j mass_j w_j X_j^2`` for one s-edge.

    ``X = (psi_+ - psi_-)/ds + (c_rot D_tau + diag(f1)) (psi_- + psi_+)/2``.
    """
    phi = basis.phi
    mass = basis.domain.mass
    mw = mass if w is None else mass * w
    if w is None:
        R = np.diag(basis.gram)
    else:
        R = phi.T @ (mw[:, None] * phi)
    Q = c_rot * basis.dtau_phi
    if f1 is not None:
        Q = Q + f1[:, None] * phi
    S = phi.T @ (mw[:, None] * Q)
    U = Q.T @ (mw[:, None] * Q)
    Ssym = 0.5 * (S + S.T)
    Sasym = 0.5 * (S.T - S)
    L11 = R / ds - Ssym + 0.25 * ds * U
    L22 = R / ds + Ssym + 0.25 * ds * U
    L12 = -R / ds + Sasym + 0.25 * ds * U
    return L11, L12, L22


def _slab_block(basis: TransverseBasis, g: np.ndarray | None) -> np.ndarray:
    """``sum_e weight_e (diff psi - g_e avg psi)_e^2`` over transverse edges."""
    if g is None:
        return basis.stiffness.copy()
    Y = basis.diff_phi - g[:, None] * basis.avg_phi
    return Y.T @ (basis.edge_weight[:, None] * Y)


def _assemble(grid: TruncatedTubeGrid, edge_coeffs: Callable, slab_coeffs: Callable,
              kind: str, warnings=()) -> SymmetricForm:
    basis, ds = grid.basis, grid.ds
    n, m = grid.n_slabs, basis.m
    diag = np.empty((n, m, m))
    off = np.zeros((max(n - 1, 0), m, m))
    for k, sk in enumerate(grid.s):
        diag[k] = ds * _slab_block(basis, slab_coeffs(sk))
    straight = None
    for e, se in enumerate(grid.s_edges):
        coeffs = edge_coeffs(se)
        if coeffs is None:
            if straight is None:
                straight = _edge_blocks(basis, None, 0.0, None, ds)
            L11, L12, L22 = straight
        else:
            L11, L12, L22 = _edge_blocks(basis, *coeffs, ds)
        lo, hi = e - 1, e  # slabs on either side; -1 and n are the ends
        if lo >= 0:
            diag[lo] += L11
        if hi < n:
            diag[hi] += L22
        if lo >= 0 and hi < n:
            off[lo] += L12.T
    diag = 0.5 * (diag + np.transpose(diag, (0, 2, 1)))
    return SymmetricForm(grid=grid, diag=diag, off=off, E1=basis.E1, kind=kind,
                         warnings=tuple(warnings))


def _as_function(values, grid_s=None) -> Callable:
    if callable(values):
        return values
    arr = np.asarray(values, dtype=float)
    if grid_s is None or arr.shape != np.shape(grid_s):
        raise ConfigurationError("sampled coefficients must match the grid")
    return lambda s: np.interp(s, grid_s, arr, left=0.0, right=0.0)


def assemble_l_sigma(grid: TruncatedTubeGrid, sigma, sign: int = -1) -> SymmetricForm:
    """Form ``|d1 psi + sign*sigma*d_tau psi|^2 + |d2 psi|^2 + |d3 psi|^2``.

    ``sign=-1`` gives ``d1 - sigma d_tau``.  ``sigma`` is a callable of ``s`` or
    samples on ``grid.s``.
    """
    if sign not in (-1, 1):
        raise ConfigurationError("sign must be -1 or +1")
    sig = _as_function(sigma, grid.s)
    lim = grid.L - grid.ds
    probe = np.linspace(-grid.L, grid.L, 8 * grid.n_intervals + 1)
    outer = np.abs(probe) >= lim
    if np.any(np.asarray(sig(probe[outer])) != 0.0):
        raise ConfigurationError("sigma support touches the truncation boundary")

    def edge(se):
        val = float(sig(se))
        return None if val == 0.0 else (None, sign * val, None)

    return _assemble(grid, edge, lambda sk: None, kind="l_sigma")


def assemble_q(grid: TruncatedTubeGrid, profile: CurvatureProfile,
               injectivity_warning: str | None = None) -> SymmetricForm:
    """Form of the bent, twisted tube after the ``h**-1/2`` unitary transformation.

    Sum of squares ``h^-2 |V1 - h_mu V_mu|^2 + |V2|^2 + |V3|^2`` with
    ``V_i = d_i psi - psi d_i F``; longitudinal factors at edge midpoints,
    transverse factors at slab edges.
    """
    dom = grid.domain
    pts = dom.points
    basis = grid.basis

    def edge(se):
        k1 = float(profile.kappa1(se))
        dk1 = float(profile.dkappa1(se))
        rho = float(profile.rho(se))
        if k1 == 0.0 and dk1 == 0.0 and rho == 0.0:
            return None
        ms = metric_at(profile, np.full(dom.n, se), pts)
        w = 1.0 / ms.h ** 2
        f1 = -(ms.dF[:, 0] - ms.h2 * ms.dF[:, 1] - ms.h3 * ms.dF[:, 2])
        return (w, rho, f1)

    def slab(sk):
        if float(profile.kappa1(sk)) == 0.0:
            return None
        ms = metric_at(profile, np.full(len(basis.edge_mid), sk), basis.edge_mid)
        return np.where(basis.edge_axis == 0, ms.dF[:, 1], ms.dF[:, 2])

    warns = (injectivity_warning,) if injectivity_warning else ()
    return _assemble(grid, edge, slab, kind="q", warnings=warns)


# --------------------------------------------------------------------------
# transparent ends
# --------------------------------------------------------------------------

def _decaying_root(c):
    c = np.asarray(c, dtype=float)
    if np.any(c < 2.0 - 1e-14):
        raise EigensolverError("transparent end evaluated inside the continuum of a channel")
    c = np.maximum(c, 2.0)
    return 0.5 * (c - np.sqrt(np.maximum(c * c - 4.0, 0.0)))


def end_response(form: SymmetricForm, mu: float, shift: float = 0.0,
                 weight: Callable | None = None, s0: float = 0.0) -> np.ndarray:
    """Diagonal Schur terms ``-r_n/ds`` for the left and right end slabs.

    Per channel ``n`` the straight tail obeys
    ``phi_{k+1} + phi_{k-1} = (2 + ds^2 (E_n - shift - mu w_k)) phi_k``;
    ``r_n`` is the ratio of the first tail value to the last slab value for
    the minimal (decaying) solution.  With a weight the ratio is obtained by
    backward recurrence from a distant point, started on the power law
    ``|s - s0|^p`` for channels at the threshold.
    """
    basis, ds, L = form.grid.basis, form.grid.ds, form.grid.L
    en = basis.energies - shift
    out = np.empty((2, basis.m))
    if weight is None:
        r = _decaying_root(2.0 + ds * ds * (en - mu))
        out[:] = -r / ds
        return out
    n_far = int(math.ceil(_FAR_FACTOR * (L + abs(s0)) / ds))
    for side, sgn in enumerate((-1.0, 1.0)):
        # tail nodes at distance L, L+ds, ... from the origin on this side
        s_tail = sgn * (L + ds * np.arange(n_far + 2))
        x = np.abs(s_tail - s0)
        w = weight(s_tail)
        c = 2.0 + ds * ds * (en[None, :] - mu * w[:, None])
        # start: power law for threshold channels, constant-coefficient root otherwise
        at_threshold = np.abs(en) < 1e-9 * max(1.0, abs(basis.E1))
        rho = np.empty(basis.m)
        if np.any(~at_threshold):
            rho[~at_threshold] = _decaying_root(np.maximum(c[-1, ~at_threshold], 2.0))
        if np.any(at_threshold):
            p = 0.5 - math.sqrt(max(0.25 - mu, 0.0))
            rho[at_threshold] = (x[-1] / x[-2]) ** p
        for k in range(n_far, -1, -1):
            rho = 1.0 / (c[k] - rho)
        out[side] = -rho / ds
    return out


# --------------------------------------------------------------------------
# spectra
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpectralResult:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    L: float
    E1: float
    lowest: float
    meta: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.values)

    @property
    def has_bound_state(self) -> bool:
        return self.count > 0


_DENSE_DOF = 1500


def _banded_to_dense(ab: np.ndarray) -> np.ndarray:
    n = ab.shape[1]
    full = np.zeros((n, n))
    for d in range(ab.shape[0]):
        idx = np.arange(n - d)
        full[idx + d, idx] = ab[d, : n - d]
        full[idx, idx + d] = ab[d, : n - d]
    return full


def _shift_below(ab: np.ndarray, hint: float):
    """Largest tried shift below the spectrum, with its banded Cholesky factor."""
    step = max(0.05, 0.05 * abs(hint))
    sigma = hint
    for _ in range(60):
        shifted = ab.copy()
        shifted[0] -= sigma
        try:
            return sigma, sla.cholesky_banded(shifted, lower=True)
        except np.linalg.LinAlgError:
            sigma -= step
            step *= 2.0
    raise EigensolverError("could not place a shift below the spectrum")


def _banded_eigs(ab: np.ndarray, k: int, vectors: bool = True, hint: float = 0.0):
    """Lowest ``k`` eigenpairs of a symmetric banded matrix (lower storage).

    Small problems are solved densely; larger ones by shift-invert Lanczos with
    a Cholesky-certified shift below the spectrum and a fixed start vector.
    """
    n = ab.shape[1]
    k = min(k, n)
    if n <= _DENSE_DOF:
        dense = _banded_to_dense(ab)
        if not vectors:
            return sla.eigh(dense, subset_by_index=[0, k - 1], eigvals_only=True), None
        return sla.eigh(dense, subset_by_index=[0, k - 1])
    sigma, chol = _shift_below(ab, hint)
    op = spla.LinearOperator((n, n), matvec=lambda x: sla.cho_solve_banded((chol, True), x),
                             dtype=float)
    v0 = np.ones(n) / math.sqrt(n)
    try:
        theta, vecs = spla.eigsh(op, k=k, which="LA", v0=v0, tol=0.0,
                                 ncv=min(n, max(2 * k + 1, 24)), maxiter=20 * n)
    except spla.ArpackNoConvergence as exc:
        res = [float(np.linalg.norm(sla.cho_solve_banded((chol, True), v) - t * v))
               for t, v in zip(exc.eigenvalues, exc.eigenvectors.T)]
        raise EigensolverError("shift-invert Lanczos did not converge", residuals=res) from exc
    vals = sigma + 1.0 / theta
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    return (vals, vecs) if vectors else (vals, None)


def _pencil_eigs(form: SymmetricForm, k: int, shift: float = 0.0, weight_diag=None,
                 end_terms=None, vectors: bool = True, hint: float | None = None):
    """Lowest ``k`` eigenpairs of ``(A - shift M + T) v = nu B v`` with diagonal ``B``."""
    bdiag = form.mass_diag if weight_diag is None else weight_diag
    scale = 1.0 / np.sqrt(bdiag)
    ab = form.banded(shift=shift, scale=scale, end_terms=end_terms)
    if hint is None:
        hint = form.E1 - shift - 0.5
    vals, vecs = _banded_eigs(ab, k, vectors, hint)
    if vecs is not None:
        vecs = vecs * scale[:, None]
    return vals, vecs


def _residuals(form, vals, vecs, shift, bdiag, end_terms):
    A = form.A
    mdiag = form.mass_diag
    out = []
    for lam, v in zip(vals, vecs.T):
        r = A @ v - shift * mdiag * v - lam * bdiag * v
        if end_terms is not None:
            m = form.m
            r[:m] += end_terms[0] * v[:m]
            r[-m:] += end_terms[1] * v[-m:]
        out.append(float(np.linalg.norm(r) / np.linalg.norm(v)))
    return np.asarray(out)


def eigenvalues_below_threshold(form: SymmetricForm, E1: float | None = None, k: int = 5,
                                gap_tolerance: float = 1e-10) -> SpectralResult:
    """Eigenvalues of ``A psi = mu M psi`` strictly below ``E1 - gap_tolerance``.

    With transparent ends the count comes from the inertia of the end-corrected
    operator at ``E1`` and each eigenvalue is the root of
    ``nu_i(mu) - mu`` with ``nu_i(mu)`` the i-th eigenvalue at fixed ``mu``.
    """
    E1 = form.E1 if E1 is None else float(E1)
    grid = form.grid
    mdiag = form.mass_diag
    if grid.ends == "dirichlet":
        vals, vecs = _pencil_eigs(form, k + 1)
        below = vals < E1 - gap_tolerance
        res = _residuals(form, vals[below], vecs[:, below], 0.0, mdiag, None)
        return SpectralResult(values=vals[below][:k], vectors=vecs[:, below][:, :k],
                              residuals=res[:k], L=grid.L, E1=E1, lowest=float(vals[0]),
                              meta={"ends": "dirichlet", "next_above": float(vals[~below][0])
                                    if np.any(~below) else math.nan})
    # transparent: inertia at the threshold
    T1 = end_response(form, E1)
    nu, _ = _pencil_eigs(form, k + 1, shift=E1, end_terms=T1, vectors=False)
    count = int(np.sum(nu < -gap_tolerance))
    values, vectors, residuals = [], [], []
    for i in range(min(count, k)):
        def g(mu, i=i):
            v, _ = _pencil_eigs(form, i + 1, end_terms=end_response(form, mu), vectors=False)
            return v[i] - mu
        lo = E1 + float(nu[i])
        if g(lo) < 0:  # nu is measured relative to E1
            raise EigensolverError("failed to bracket a bound state")
        mu = brentq(g, lo, E1, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
        T = end_response(form, mu)
        v, vec = _pencil_eigs(form, i + 1, end_terms=T)
        values.append(mu)
        vectors.append(vec[:, i])
        residuals.append(_residuals(form, [mu], vec[:, i:i + 1], 0.0, mdiag, T)[0])
    lowest = values[0] if values else E1 + float(nu[0])
    vecs = np.column_stack(vectors) if vectors else np.zeros((grid.dof, 0))
    return SpectralResult(values=np.asarray(values), vectors=vecs, residuals=np.asarray(residuals),
                          L=grid.L, E1=E1, lowest=lowest,
                          meta={"ends": "transparent", "threshold_inertia": nu.tolist(),
                                "count": count})


def weighted_ground_value(form: SymmetricForm, weight: Callable, s0: float = 0.0,
                          E1: float | None = None) -> tuple[float, np.ndarray, float]:
    """Smallest ``mu`` with ``(A - E1 M) psi = mu W psi``, ``W = ds w(s) gram``.

    Returns ``(mu, psi, residual)``.  With transparent ends the tails carry
    the same weight; ``mu`` is then capped by the weighted threshold ``1/4``
    of the straight tails.
    """
    E1 = form.E1 if E1 is None else float(E1)
    grid = form.grid
    wdiag = np.repeat(grid.ds * weight(grid.s), grid.basis.m) * np.tile(grid.basis.gram, grid.n_slabs)
    if grid.ends == "dirichlet":
        vals, vecs = _pencil_eigs(form, 1, shift=E1, weight_diag=wdiag, hint=-0.05)
        res = _residuals(form, vals, vecs, E1, wdiag, None)
        return float(vals[0]), vecs[:, 0], float(res[0])

    def nu(mu):
        T = end_response(form, mu, shift=E1, weight=weight, s0=s0)
        v, _ = _pencil_eigs(form, 1, shift=E1, weight_diag=wdiag, end_terms=T, vectors=False,
                            hint=-0.05)
        return float(v[0])

    top = nu(0.0)
    if top <= 0.0:
        mu = top
    else:
        hi = min(top, 0.25)
        if nu(hi) - hi >= 0.0:
            mu = hi
        else:
            mu = brentq(lambda x: nu(x) - x, 0.0, hi, xtol=1e-14, rtol=1e-13, maxiter=200)
    T = end_response(form, mu, shift=E1, weight=weight, s0=s0)
    vals, vecs = _pencil_eigs(form, 1, shift=E1, weight_diag=wdiag, end_terms=T, hint=-0.05)
    res = _residuals(form, vals, vecs, E1, wdiag, T)
    return float(mu), vecs[:, 0], float(res[0])


def slab_values(form: SymmetricForm, psi: np.ndarray) -> np.ndarray:
    """Nodal values per slab (slabs x transverse nodes) of a coefficient vector."""
    c = psi.reshape(form.grid.n_slabs, form.m)
    return c @ form.grid.basis.phi.T


@dataclass(frozen=True)
class TruncationRow:
    L: float
    lowest: float
    count: int


def truncation_study(build_form: Callable[[float], SymmetricForm], L_values: Sequence[float],
                     k: int = 5, tol: float = 1e-6) -> dict:
    """Lowest eigenvalue and count below threshold for increasing truncation lengths.

    Eigenvalues below threshold are declared genuine when the last two lengths
    agree within ``tol``.
    """
    L_values = [float(x) for x in L_values]
    if any(b <= a for a, b in zip(L_values, L_values[1:])):
        raise ConfigurationError("L values must increase")
    rows = []
    E1 = math.nan
    for L in L_values:
        form = build_form(L)
        res = eigenvalues_below_threshold(form, k=k)
        E1 = res.E1
        rows.append(TruncationRow(L=L, lowest=res.lowest, count=res.count))
    lows = np.array([r.lowest for r in rows])
    stable = len(rows) >= 2 and abs(lows[-1] - lows[-2]) < tol
    return {"rows": rows, "E1": E1,
            "monotone_decreasing": bool(np.all(np.diff(lows) <= 1e-12)),
            "stable": bool(stable),
            "genuine_bound_state": bool(stable and rows[-1].count > 0 and rows[-2].count > 0)}
