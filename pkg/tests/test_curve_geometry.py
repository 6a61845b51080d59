import math

import numpy as np
import pytest
from scipy.integrate import quad

from twistguide.cross_section import Rectangle
from twistguide.curve_geometry import (
    Bump,
    check_injectivity,
    ellipticity_bounds,
    frame_increment_check,
    integrate_frame,
    make_profile,
    metric_at,
    straight_profile,
    tube_map,
    tube_surface_mesh,
    write_obj,
)
from twistguide.errors import ImmersionError, InvalidProfileError


def cos2(a, w=2.0, c=0.0):
    return {"kind": "cos2", "amplitude": a, "center": c, "width": w}


@pytest.mark.parametrize("kind", ["cos2", "poly"])
def test_bump_derivatives_match_finite_differences(kind):
    b = Bump(kind, 0.7, 0.3, 1.5)
    s = np.linspace(-0.3, 0.9, 41)
    h = 1e-5
    d = b.derivatives(s)
    for order in range(3):
        fd = (b.derivatives(s + h)[order] - b.derivatives(s - h)[order]) / (2 * h)
        assert np.allclose(fd, d[order + 1], atol=1e-5 * max(1.0, np.abs(d[order + 1]).max()))


@pytest.mark.parametrize("kind", ["cos2", "poly"])
def test_bump_primitive(kind):
    b = Bump(kind, 1.3, -0.2, 1.0)
    for x in (-0.6, -0.1, 0.2, 0.7):
        exact = quad(lambda s: float(b.derivatives(s)[0]), -1.0, x, points=[-0.7, 0.3])[0]
        assert math.isclose(float(b.integral_to(x)), exact, abs_tol=1e-10)


def test_kappa1_must_be_positive_inside_support():
    with pytest.raises(InvalidProfileError):
        make_profile([cos2(1.0, 1.0, -0.5), cos2(1.0, 1.0, 0.6)], support=(-1.0, 1.1))
    with pytest.raises(InvalidProfileError):
        make_profile([cos2(-0.2)])
    prof = make_profile([], [cos2(0.5)], [])
    assert prof.norms["kappa1"] == 0.0


def test_sup_norms_of_cos2_bump():
    prof = make_profile([cos2(0.4)], [cos2(0.5)], [cos2(0.5)], theta_is_rate=True, ds=0.01)
    assert math.isclose(prof.norms["kappa1"], 0.4, rel_tol=1e-9)
    assert math.isclose(prof.norms["dkappa1"], 0.4 * math.pi / 2, rel_tol=1e-9)
    assert prof.norms["rho"] < 1e-14


def test_straight_frame_is_identity():
    frame = integrate_frame(straight_profile(), ds=1e-2)
    assert np.allclose(frame.e, np.eye(3)[None], atol=1e-15)
    assert np.allclose(frame.gamma[:, 0], frame.s)


def test_planar_bend_stays_planar_and_turns_by_total_curvature():
    prof = make_profile([cos2(0.5)], ds=1e-3)
    frame = integrate_frame(prof, ds=1e-3)
    assert np.abs(frame.gamma[:, 2]).max() < 1e-12
    turn = math.atan2(frame.e[-1, 0, 1], frame.e[-1, 0, 0])
    assert math.isclose(turn, 0.5 * 1.0, rel_tol=1e-8)  # integral of the bump is a*w/2


def test_frame_increment_bound_and_orthonormality():
    prof = make_profile([cos2(0.8)], [cos2(1.0)], [], ds=1e-3)
    frame = integrate_frame(prof, ds=1e-3)
    assert frame.gram_defect < 1e-12
    assert frame_increment_check(frame, 2000, seed=1)["holds"]


def test_metric_matches_jacobian_of_tube_map():
    prof = make_profile([cos2(0.3)], [cos2(0.6, 1.5)], [cos2(0.4, 1.2)], ds=1e-3)
    frame = integrate_frame(prof, ds=1e-3, extend=(-2, 2))
    rng = np.random.default_rng(0)
    s = rng.uniform(-0.9, 0.9, 20)
    t = rng.uniform(-0.5, 0.5, (20, 2))
    h = 1e-5
    ms = metric_at(prof, s, t)
    for i in range(20):
        J = np.empty((3, 3))
        J[:, 0] = (tube_map(frame, s[i] + h, t[i]) - tube_map(frame, s[i] - h, t[i]))[0] / (2 * h)
        for k in range(2):
            dt = np.zeros(2)
            dt[k] = h
            J[:, k + 1] = (tube_map(frame, s[i], t[i] + dt) - tube_map(frame, s[i], t[i] - dt))[0] / (2 * h)
        assert np.allclose(J.T @ J, ms.G[i], atol=5e-8)


def test_tang_frame_metric_is_diagonal():
    prof = make_profile([cos2(0.3)], [cos2(0.5)], [cos2(0.5)], theta_is_rate=True, ds=1e-3)
    ms = metric_at(prof, np.linspace(-1, 1, 11), np.full((11, 2), 0.3))
    assert np.allclose(ms.h2, 0) and np.allclose(ms.h3, 0)


def test_immersion_violation_raises():
    prof = make_profile([cos2(2.0)], ds=1e-2)
    with pytest.raises(ImmersionError):
        metric_at(prof, 0.0, np.array([0.6, 0.0]))
    with pytest.raises(ImmersionError):
        ellipticity_bounds(prof, 0.6)
    assert ellipticity_bounds(prof, 0.25) == (0.5, 1.5)


def test_injectivity_report_statuses():
    small = make_profile([cos2(0.05)], [cos2(0.05)], [], ds=1e-3)
    assert check_injectivity(small, 1.0).status == "PASS"
    big = make_profile([cos2(0.5)], [cos2(0.5)], [], ds=1e-3)
    rep = check_injectivity(big, 1.118, scan=True, shape=Rectangle(1.0, 2.0))
    assert rep.status == "INCONCLUSIVE" and rep.scan_overlap is False
    assert check_injectivity(make_profile([cos2(2.0)], ds=1e-2), 1.0).status == "FAIL"


def test_obj_export(tmp_path):
    prof = make_profile([cos2(0.2)], ds=1e-2)
    frame = integrate_frame(prof, extend=(-2, 2))
    verts, faces = tube_surface_mesh(frame, Rectangle(1.0, 2.0), np.linspace(-2, 2, 11), 16)
    path = tmp_path / "t.obj"
    write_obj(path, verts, faces)
    lines = path.read_text().splitlines()
    assert all(line.split()[0] in ("v", "f") for line in lines)
    nv = sum(1 for line in lines if line.startswith("v "))
    idx = [int(x) for line in lines if line.startswith("f ") for x in line.split()[1:]]
    assert min(idx) == 1 and max(idx) == nv
