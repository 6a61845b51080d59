import math

import numpy as np
import pytest

from twistguide.cross_section import Disk, Rectangle, angular_derivative_matrix, build_domain
from twistguide.curve_geometry import Bump
from twistguide.errors import HardyUnavailableError
from twistguide.hardy_constants import (
    birman_constant,
    birman_exact_max,
    birman_inequality_check,
    birman_ratio,
    classical_hardy_ratio,
    decompose_sigma,
    discrete_radial_function,
    global_hardy_bound,
    local_hardy_coefficient,
    mixed_term_constants,
    optimize_hardy_bound,
)


def bump(a=1.0, c=0.0, w=2.0):
    b = Bump("cos2", a, c, w)
    return lambda s: b.derivatives(np.asarray(s, dtype=float))[0]


@pytest.mark.parametrize("length, sub, expected", [(1, 1, 18), (2, 1, 66), (1, 0.5, 66)])
def test_birman_constant_values(length, sub, expected):
    assert birman_constant(length, sub) == expected


def test_birman_constant_rejects_empty_subinterval():
    with pytest.raises(ValueError):
        birman_constant(1.0, 0.0)


def test_birman_ratio_closed_forms():
    x = np.linspace(0, 1, 101)
    assert math.isclose(birman_ratio(x, np.ones_like(x), (0, 1)), 1.0)
    assert math.isclose(birman_ratio(x, x, (0, 1)), 0.25, rel_tol=1e-12)


def test_birman_random_search_below_constant():
    rep = birman_inequality_check((0, 2), (0.5, 1), trials=1000, seed=3)
    assert rep["max_ratio"] < 66 and rep["max_ratio"] <= rep["bound"]
    assert rep["max_ratio"] <= rep["exact_max"] * (1 + 1e-9)


def test_birman_exact_max_below_constant():
    for iv, sub in [((0, 1), (0, 1)), ((0, 3), (1, 1.5)), ((0, 0.5), (0.1, 0.2))]:
        assert birman_exact_max(iv, sub) <= birman_constant(iv[1] - iv[0], sub[1] - sub[0])


def test_mixed_term_worked_example():
    c1, c2, c3, gt, g = mixed_term_constants(sup_A=1, dsup_A=2, sup=1, a=0.5, lam=0.1, birman=18,
                                             sigma0=0.5, alpha=1, beta=1)
    assert (c1, c2) == (0.25, 1.0)
    assert math.isclose(c3, 720) and math.isclose(gt, 360) and math.isclose(g, 360.5)


def test_mixed_term_constant_sigma_branch():
    c1, c2, c3, gt, g = mixed_term_constants(1.5, 0.0, 1.5, 0.5, 0.3, 18, 1.0, 0.5, 0.5)
    assert c2 == c3 == gt == 0.0 and math.isclose(g, 2 * c1 / 0.5)


def test_mixed_term_homogeneity():
    base = mixed_term_constants(1, 2, 1, 0.5, 0.1, 18, 0.5, 1, 1)
    double = mixed_term_constants(2, 4, 2, 0.5, 0.1, 18, 1.0, 1, 1)
    assert math.isclose(double[0], 4 * base[0]) and math.isclose(double[1], 4 * base[1])


def test_mixed_term_requires_positive_lambda():
    with pytest.raises(HardyUnavailableError):
        mixed_term_constants(1, 1, 1, 0.5, 0.0, 18, 0.5, 1, 1)


def test_local_coefficient_example_and_limit():
    assert local_hardy_coefficient(1.0, 0.5, 0.5) == 0.5
    assert math.isclose(local_hardy_coefficient(100.0, 0.5, 0.5), 0.5e-4)
    assert local_hardy_coefficient(1.0, 0.999, 0.5) < 0.01


def test_global_bound_example_and_lambda_limit():
    assert math.isclose(global_hardy_bound(1, 1, 0.5, 1, 1, 1), 1 / 66)
    small = [global_hardy_bound(lam, 1, 0.5, 1, 1, 1) for lam in (1e-2, 1e-4, 1e-6)]
    assert small[0] > small[1] > small[2] and small[2] < 1e-6
    with pytest.raises(HardyUnavailableError):
        global_hardy_bound(0.0, 1, 0.5, 1, 1, 1)


def test_decomposition_of_two_bumps():
    b1, b2 = bump(1.0, -2.0, 1.0), bump(0.5, 2.0, 1.0)
    dec = decompose_sigma(lambda s: b1(s) + b2(s), (-3, 3), ds=1e-3)
    assert len(dec.components) == 2
    lengths = [c.interval[1] - c.interval[0] for c in dec.components]
    assert np.allclose(lengths, 1.0, atol=3e-3)
    assert math.isclose(dec.support_measure, sum(lengths))
    assert dec.component_of(2.0) == 1


def test_decomposition_of_zero_sigma_refused():
    with pytest.raises(HardyUnavailableError):
        decompose_sigma(lambda s: 0 * s, (-1, 1))


def test_optimized_bound_monotone_in_lambda():
    dec = decompose_sigma(bump(), (-1, 1), ds=1e-3)
    c = [optimize_hardy_bound(dec, 1.1, lam, 0.0).c_h for lam in (0.1, 0.5, 2.0)]
    assert 0 < c[0] < c[1] < c[2]
    with pytest.raises(HardyUnavailableError):
        optimize_hardy_bound(dec, 1.1, 0.0, 0.0)


def test_optimized_bound_matches_its_ledger():
    hb = optimize_hardy_bound(decompose_sigma(bump(0.5), (-1, 1)), 1.1, 1.0, 0.0)
    assert hb.ledger["c_h"] == hb.c_h and hb.ledger["c0"] == hb.c0
    again = global_hardy_bound(1.0, hb.gamma_alpha, hb.alpha, hb.b, hb.c0, hb.min_sigma_J)
    assert math.isclose(again, hb.c_h, rel_tol=1e-14)
    assert 0 < hb.b and 0.1 <= hb.alpha <= 0.9


def test_classical_hardy_constant():
    r = classical_hardy_ratio()
    assert 2.5 < r <= 4.0


@pytest.mark.parametrize("shape", [Disk(1.0), Rectangle(2.0, 2.0)])
def test_radial_function_in_angular_kernel(shape):
    dom = build_domain(shape, 0.1)
    f = discrete_radial_function(dom, 0.5)
    D = angular_derivative_matrix(dom)
    assert np.abs(D @ f).max() < 1e-10
    assert np.all(f[np.hypot(*dom.points.T) >= 0.5] == 0)
    assert math.isclose(dom.inner(f, f), 1.0)
