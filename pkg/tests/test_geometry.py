import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from magspec.geometry import (ConstantField, GeometryError, HelicalField, b_dot_t, ball_kappa_nB,
                              chart_for_x3, curve_frame, distance_to_helical_gamma, extract_gamma,
                              gamma_branch, gamma_point, helical_curve, kappa_nB, spheroid_surface)

heights = st.floats(min_value=-0.85, max_value=0.85)
pitches = st.floats(min_value=0.1, max_value=3.0)


def test_field_unit_and_curl():
    f = HelicalField(1.3)
    x = np.random.default_rng(0).normal(size=(50, 3))
    assert f.check_unit(x) < 1e-14
    # curl of the potential, by central differences, is the field
    p, h = np.array([0.2, -0.4, 0.3]), 1e-5
    J = np.column_stack([(f.potential(p + h * e) - f.potential(p - h * e)) / (2 * h) for e in np.eye(3)])
    curl = np.array([J[2, 1] - J[1, 2], J[0, 2] - J[2, 0], J[1, 0] - J[0, 1]])
    assert np.allclose(curl, f(p), atol=1e-9)


@pytest.mark.parametrize("tau", [0.0, -1.0, np.nan])
def test_field_rejects_pitch(tau):
    with pytest.raises(ValueError):
        HelicalField(tau)


@given(heights, pitches, st.sampled_from(["c1", "c2"]))
@settings(max_examples=30, deadline=None)
def test_charts_lie_on_gamma(x3, tau, branch):
    x = gamma_branch(branch, x3, tau)
    assert abs(np.linalg.norm(x) - 1.0) < 1e-14
    assert abs(HelicalField(tau)(x) @ x) < 1e-14


@given(heights, pitches, st.sampled_from(["c1", "c2"]))
@settings(max_examples=25, deadline=None)
def test_closed_forms_match_generic(x3, tau, branch):
    pt = gamma_point(x3, branch, tau, with_normal_form=False)
    assert abs(pt.b_dot_t - b_dot_t(x3, tau)) <= 1e-6
    generic = ball_kappa_nB(HelicalField(tau), pt.position, pt.T, pt.V)
    assert abs(generic - kappa_nB(x3, tau)) <= 1e-6


def test_polar_charts_continue_the_height_charts():
    tau = 0.8
    for x3, sheet in ((0.95, 1), (0.95, -1), (-0.95, 1), (-0.95, -1)):
        br, p = chart_for_x3(x3, sheet)
        pt = gamma_point(p, br, tau, with_normal_form=False)
        assert distance_to_helical_gamma(pt.position, tau) < 1e-12
        assert abs(pt.b_dot_t - b_dot_t(x3, tau)) < 1e-6


def test_chart_endpoint_rejected():
    with pytest.raises(GeometryError):
        gamma_branch("c1", 1.0, 1.0)
    with pytest.raises(GeometryError):
        gamma_branch("c9", 0.0, 1.0)


def test_frame_orthonormal_and_oriented():
    tau = 1.1
    for br in ("c1", "c2", "c3", "c4"):
        c = helical_curve(br, tau)
        T, V, N = curve_frame(c, 0.3)
        M = np.vstack([T, V, N])
        assert np.allclose(M @ M.T, np.eye(3), atol=1e-12)
        assert HelicalField(tau)(c.position(0.3)) @ T >= 0


def test_geodesic_curvature_vanishes_without_pitch():
    assert abs(gamma_point(0.3, "c1", 1e-6, with_normal_form=False).kappa_g) < 1e-5


def test_rotation_symmetry_maps_sheets():
    """A half-turn about the x1-axis maps c1 at height x3 to c2 at height -x3."""
    tau = 1.0
    for x3 in (0.2, 0.5, 0.8):
        a = gamma_point(x3, "c1", tau, with_normal_form=False)
        b = gamma_point(-x3, "c2", tau, with_normal_form=False)
        assert a.kappa_g == pytest.approx(b.kappa_g, abs=1e-7)
        assert a.kappa_nB == pytest.approx(b.kappa_nB, abs=1e-12)


def test_normal_form_identities():
    nf = gamma_point(0.4, "c1", 1.0).normal_form
    assert abs(nf.identity_r) < 1e-8
    assert abs(nf.identity_s) < 1e-8
    assert np.isfinite(nf.zeta) and np.isfinite(nf.kappa_check)


@pytest.fixture(scope="module")
def helical_extraction():
    return extract_gamma(spheroid_surface(HelicalField(1.0), pole_axis=0), resolution=100)


def test_extraction_matches_charts(helical_extraction):
    ex = helical_extraction
    assert len(ex.curves) == 1
    assert ex.bn_max < 1e-10
    d = max(distance_to_helical_gamma(x, 1.0) for x in ex.points)
    assert d <= 2 * ex.mesh


def test_extraction_curvatures_match_closed_form(helical_extraction):
    ex = helical_extraction
    kn = np.array([kappa_nB(x[2], 1.0) for x in ex.points])
    bt = np.array([b_dot_t(x[2], 1.0) for x in ex.points])
    assert np.max(np.abs(ex.kappa_nB - kn)) < 1e-6
    assert np.max(np.abs(np.abs(ex.b_dot_t) - bt)) < 1e-6
    assert ex.c1_holds


def test_extraction_tangency_points(helical_extraction):
    tp = helical_extraction.tangency_points
    assert len(tp) == 2
    assert np.allclose(sorted(tp[:, 2]), [-1.0, 1.0], atol=1e-6)


def test_constant_field_on_sphere_equator():
    ex = extract_gamma(spheroid_surface(ConstantField(), pole_axis=2), resolution=60)
    assert len(ex.curves) == 1
    assert np.allclose(ex.kappa_nB, 1.0, atol=1e-6)
    assert np.allclose(ex.points[:, 2], 0.0, atol=1e-10)


def test_extraction_on_ellipsoid():
    ex = extract_gamma(spheroid_surface(ConstantField((1.0, 1.0, 1.0)), axes=(1, 2, 3), pole_axis=0),
                       resolution=60)
    assert len(ex.curves) == 1 and ex.c1_holds
    a = np.array([1.0, 2.0, 3.0])
    # points lie on the ellipsoid and the field is tangent there
    assert np.allclose(np.sum(ex.points ** 2 / a ** 2, axis=1), 1.0, atol=1e-12)
    n = ex.points / a ** 2
    assert np.max(np.abs(n @ np.ones(3))) < 1e-9 * np.max(np.linalg.norm(n, axis=1))


def test_field_without_gamma():
    # a radial field is normal to the sphere everywhere, so B.N never vanishes
    radial = lambda x: np.asarray(x) / np.linalg.norm(x, axis=-1, keepdims=True)
    ex = extract_gamma(spheroid_surface(radial), resolution=30)
    assert ex.curves == []
    assert ex.diagnostic
