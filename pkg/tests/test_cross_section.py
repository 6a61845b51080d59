import math

import numpy as np
import pytest

from twistguide.cross_section import (
    Disk,
    Ellipse,
    Polygon,
    Rectangle,
    TransverseGroundPair,
    angular_derivative_matrix,
    build_domain,
    check_rotational_symmetry,
    compute_lambda,
    dirichlet_ground_pair,
    lambda_operator,
    mass_weights,
    shape_from_dict,
    stiffness_matrix,
    transverse_modes,
)
from twistguide.errors import DegenerateGroundStateError


def test_shape_descriptors_round_trip():
    for shape in (Rectangle(1.0, 2.0), Disk(0.7, (0.1, 0.0)), Ellipse(1.0, 0.5),
                  Polygon(((0, 0), (1, 0), (0, 1)))):
        assert shape_from_dict(shape.to_dict()) == shape


def test_interior_nodes_only():
    dom = build_domain(Disk(1.0), 0.1)
    assert np.all(np.hypot(*dom.points.T) < 1.0)
    assert dom.n == int(np.sum([(i * 0.1) ** 2 + (j * 0.1) ** 2 < 1 - 1e-12
                                for i in range(-10, 11) for j in range(-10, 11)]))


def test_lumped_mass_tiles_aligned_rectangle():
    dom = build_domain(Rectangle(1.0, 2.0), 0.05)
    assert math.isclose(mass_weights(dom).sum(), 2.0, rel_tol=1e-12)


@pytest.mark.parametrize("shape, exact", [(Rectangle(1.0, 1.0), 2 * math.pi ** 2),
                                          (Disk(1.0), 5.783185962946784)])
def test_eigenvalue_at_least_second_order(shape, exact):
    errs = [abs(dirichlet_ground_pair(build_domain(shape, d)).E1 - exact) for d in (0.05, 0.025)]
    assert errs[0] / errs[1] > 3.5


def test_ground_state_positive_and_normalized():
    dom = build_domain(Ellipse(1.0, 0.6), 0.05)
    gp = dirichlet_ground_pair(dom)
    assert np.all(gp.J1 > 0)
    assert math.isclose(dom.inner(gp.J1, gp.J1), 1.0, rel_tol=1e-12)
    assert gp.gap > 0 and not gp.degenerate


def test_rectangle_higher_modes():
    vals, vecs = transverse_modes(build_domain(Rectangle(1.0, 2.0), 0.02), 3)
    exact = [math.pi ** 2 * (1 + 0.25 * k * k) for k in (1, 2, 3)]
    assert np.allclose(vals, exact, rtol=5e-3)


def test_stiffness_symmetric_and_positive():
    K = stiffness_matrix(build_domain(Disk(1.0), 0.1)).toarray()
    assert np.allclose(K, K.T)
    assert np.linalg.eigvalsh(K).min() > 0


def test_angular_derivative_of_linear_function():
    # d_tau = t3 d2 - t2 d3, so d_tau t2 = t3 and d_tau t3 = -t2 on interior stencils
    dom = build_domain(Rectangle(2.0, 2.0), 0.1)
    D = angular_derivative_matrix(dom)
    t2, t3 = dom.points.T
    interior = (np.abs(t2) < 0.85) & (np.abs(t3) < 0.85)
    assert np.allclose((D @ t2)[interior], t3[interior], atol=1e-12)
    assert np.allclose((D @ t3)[interior], -t2[interior], atol=1e-12)


def test_lambda_positive_for_rectangle_and_small_for_disk():
    assert compute_lambda(build_domain(Rectangle(1.0, 2.0), 0.05)).lam > 0.5
    dom = build_domain(Disk(1.0), 0.05)
    assert compute_lambda(dom).lam < 1e-4 * dirichlet_ground_pair(dom).E1


def test_lambda_bounded_by_angular_energy_of_ground_state():
    dom = build_domain(Rectangle(1.0, 2.0), 0.05)
    gp = dirichlet_ground_pair(dom)
    B = lambda_operator(dom, gp.E1)
    rayleigh = gp.J1 @ (B @ gp.J1)
    assert compute_lambda(dom, gp).lam <= rayleigh + 1e-12


def test_degenerate_ground_state_refused():
    dom = build_domain(Rectangle(1.0, 1.0), 0.1)
    fake = TransverseGroundPair(E1=1.0, J1=np.ones(dom.n), delta=0.1, E2=1.0)
    with pytest.raises(DegenerateGroundStateError):
        compute_lambda(dom, fake)


def test_rotational_symmetry_report():
    assert check_rotational_symmetry(Disk(1.0), [0.3, 1.0, 2.0]).is_symmetric_for_all_alpha
    rep = check_rotational_symmetry(Rectangle(1.0, 1.0), [math.pi / 2, 1.0])
    assert rep.satisfies_nonsymmetry and rep.witness_alpha == 1.0
    assert check_rotational_symmetry(Rectangle(1.0, 2.0), [math.pi]).is_symmetric_for_all_alpha
