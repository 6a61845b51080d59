import math

import numpy as np
import pytest

from twistguide.cross_section import Disk, Rectangle, build_domain
from twistguide.curve_geometry import Bump, make_profile
from twistguide.errors import ConfigurationError
from twistguide.waveguide_operators import (
    _decaying_root,
    assemble_l_sigma,
    assemble_q,
    eigenvalues_below_threshold,
    make_tube_grid,
    transverse_basis,
    truncation_study,
    weighted_ground_value,
)


@pytest.fixture(scope="module")
def rect():
    dom = build_domain(Rectangle(1.0, 2.0), 0.1)
    return dom, transverse_basis(dom, 12)


def bump_sigma(a=1.0):
    b = Bump("cos2", a, 0.0, 2.0)
    return lambda s: b.derivatives(np.asarray(s, dtype=float))[0]


def zero(s):
    return np.zeros_like(np.asarray(s, dtype=float))


def test_straight_tube_dirichlet_spectrum_is_exact(rect):
    dom, basis = rect
    L, ds = 3.0, 0.1
    grid = make_tube_grid(dom, L, ds, basis=basis)
    res = eigenvalues_below_threshold(assemble_l_sigma(grid, zero))
    n = grid.n_intervals
    assert res.count == 0
    assert math.isclose(res.lowest, basis.E1 + (2 - 2 * math.cos(math.pi / n)) / ds ** 2,
                        rel_tol=1e-12)


def test_straight_tube_transparent_has_no_bound_state(rect):
    dom, basis = rect
    grid = make_tube_grid(dom, 3.0, 0.1, ends="transparent", basis=basis)
    assert eigenvalues_below_threshold(assemble_l_sigma(grid, zero)).count == 0


def test_form_matrix_symmetric_and_energy_consistent(rect):
    dom, basis = rect
    grid = make_tube_grid(dom, 4.0, 0.1, basis=basis, support=(-1, 1))
    form = assemble_l_sigma(grid, bump_sigma())
    A = form.A
    assert abs(A - A.T).max() < 1e-12
    psi = np.random.default_rng(0).normal(size=grid.dof)
    assert math.isclose(form.energy(psi), psi @ (A @ psi), rel_tol=1e-12)


def test_twisted_form_never_below_threshold_with_dirichlet_ends(rect):
    dom, basis = rect
    grid = make_tube_grid(dom, 4.0, 0.1, basis=basis, support=(-1, 1))
    res = eigenvalues_below_threshold(assemble_l_sigma(grid, bump_sigma(2.0)))
    assert res.count == 0 and res.lowest > basis.E1


def test_bent_form_reduces_to_twisted_form_without_bending(rect):
    dom, basis = rect
    prof = make_profile([], [{"amplitude": 0.7, "width": 2.0}],
                        [{"amplitude": 0.2, "width": 1.5}], ds=1e-3, theta_is_rate=True)
    grid = make_tube_grid(dom, 4.0, 0.1, basis=basis, support=prof.support)
    q = assemble_q(grid, prof)
    ls = assemble_l_sigma(grid, lambda s: prof.dtheta(s) - prof.kappa2(s))
    assert np.allclose(q.diag, ls.diag, atol=1e-12)
    assert np.allclose(q.off, ls.off, atol=1e-12)


def test_sigma_support_must_fit(rect):
    dom, basis = rect
    with pytest.raises(ConfigurationError):
        make_tube_grid(dom, 2.0, 0.1, basis=basis, support=(-1.5, 1.5))
    with pytest.raises(ConfigurationError):
        make_tube_grid(dom, 2.0, 0.3, basis=basis)


def test_decaying_root_solves_characteristic_equation():
    c = np.array([2.0, 2.01, 3.0, 10.0])
    r = _decaying_root(c)
    assert np.all(r <= 1) and np.allclose(r + 1 / r, c)


def test_weighted_value_invariant_under_sign_of_sigma(rect):
    dom, basis = rect
    grid = make_tube_grid(dom, 6.0, 0.1, ends="transparent", basis=basis, support=(-1, 1))
    w = lambda s: 1 / (1 + s ** 2)
    sig = bump_sigma()
    mu_p = weighted_ground_value(assemble_l_sigma(grid, sig, sign=1), w)[0]
    mu_m = weighted_ground_value(assemble_l_sigma(grid, lambda s: -sig(s), sign=1), w)[0]
    assert mu_p > 0.05
    assert math.isclose(mu_p, mu_m, rel_tol=1e-8)


def test_no_weighted_positivity_without_twist(rect):
    dom, basis = rect
    grid = make_tube_grid(dom, 6.0, 0.1, ends="transparent", basis=basis)
    mu = weighted_ground_value(assemble_l_sigma(grid, zero), lambda s: 1 / (1 + s ** 2))[0]
    assert abs(mu) < 1e-6


def test_disk_twist_has_no_effect():
    dom = build_domain(Disk(1.0), 0.1)
    basis = transverse_basis(dom, 12)
    grid = make_tube_grid(dom, 4.0, 0.1, basis=basis, support=(-1, 1))
    twisted = eigenvalues_below_threshold(assemble_l_sigma(grid, bump_sigma(3.0))).lowest
    straight = eigenvalues_below_threshold(assemble_l_sigma(grid, zero)).lowest
    assert abs(twisted - straight) < 1e-3 * (straight - basis.E1)


def test_truncation_study_rejects_unsorted_lengths(rect):
    dom, basis = rect
    with pytest.raises(ConfigurationError):
        truncation_study(lambda L: None, [4.0, 3.0])


def test_truncation_study_monotone_for_straight_tube(rect):
    dom, basis = rect
    study = truncation_study(
        lambda L: assemble_l_sigma(make_tube_grid(dom, L, 0.1, basis=basis), zero), [2.0, 4.0, 8.0])
    assert study["monotone_decreasing"] and not study["genuine_bound_state"]
