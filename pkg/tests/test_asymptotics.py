import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from magspec.asymptotics import (Regime, Variant, brute_force_threshold, c_conj, constant_field_energy_spread,
                                 f_prime, f_v, gamma_tilde, helical_energy, minimize_over_gamma,
                                 predicted_gamma_hat, predicted_minimizers, tau0, two_term_eigenvalue)
from magspec.geometry import b_dot_t, kappa_nB


def _match(points, expected, tol):
    assert len(points) == len(expected)
    for e in expected:
        assert min(np.linalg.norm(p - e) for p in points) <= tol


def test_threshold_closed_form_vs_brute_force(constants):
    closed = tau0(constants.delta0)
    assert abs(closed - brute_force_threshold(constants.delta0)) <= 1e-8
    assert abs(f_prime(closed, 1.0 - constants.delta0)) < 1e-12


@given(st.floats(0.05, 0.95))
@settings(max_examples=25, deadline=None)
def test_threshold_is_minimizer_of_f(d0):
    t0 = tau0(d0)
    v = np.linspace(0.0, 5.0, 4001)
    assert f_v(t0, 1.0 - d0) <= f_v(v, 1.0 - d0).min() + 1e-12


def test_threshold_rejects_bad_delta():
    for d0 in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            tau0(d0)


def test_density_matches_helical_energy(constants):
    # generic evaluation from the closed-form curvatures agrees with the u-reduction
    tau = 0.8
    for x3 in np.linspace(-0.9, 0.9, 7):
        direct = gamma_tilde(kappa_nB(x3, tau), b_dot_t(x3, tau), constants)
        assert direct == pytest.approx(float(helical_energy(x3, tau, constants)), rel=1e-12)


def test_c_conj_reduces_at_zero_angle(constants):
    expected = 2.0 ** (-2.0 / 3.0) * constants.delta0 ** (1.0 / 3.0) * constants.nu0_hat
    assert c_conj(1.0, 0.0, constants) == pytest.approx(expected, rel=1e-14)
    assert c_conj(-8.0, 0.0, constants) == pytest.approx(4.0 * expected, rel=1e-14)


def test_density_validation(constants):
    with pytest.raises(ValueError):
        gamma_tilde(0.0, 0.2, constants)
    with pytest.raises(ValueError):
        gamma_tilde(1.0, 1.1, constants)
    with pytest.raises(ValueError):
        gamma_tilde(1.0, 0.2, None)


def test_sub_threshold_minimizers(constants):
    tau = 0.5 * tau0(constants.delta0)
    rep = minimize_over_gamma(tau, constants)
    assert rep.regime is Regime.SUB_THRESHOLD
    _match(rep.argmin, predicted_minimizers(tau, constants.delta0), 1e-6)
    assert rep.gamma_hat == pytest.approx(predicted_gamma_hat(tau, constants), rel=1e-12)


@pytest.mark.parametrize("tau", [0.5, 1.0, 3.0])
def test_super_threshold_minimizers(constants, tau):
    rep = minimize_over_gamma(tau, constants)
    assert rep.regime is Regime.SUPER_THRESHOLD
    expected = predicted_minimizers(tau, constants.delta0)
    assert len(expected) == 4
    _match(rep.argmin, expected, 1e-6)
    assert rep.gamma_hat == pytest.approx(predicted_gamma_hat(tau, constants), rel=1e-12)
    assert rep.gamma_hat <= rep.sample_min + 1e-14


def test_squared_variant_prefers_the_poles(constants):
    # with (B.T)^2 the density is (1 + delta0 tau^2 u^2)^(1/3), increasing in u = 1 - x3^2
    rep = minimize_over_gamma(1.0, constants, variant=Variant.SQUARED_BT)
    _match(rep.argmin, [np.array([0, 0, -1.0]), np.array([0, 0, 1.0])], 1e-6)
    linear = minimize_over_gamma(1.0, constants)
    assert len(rep.argmin) != len(linear.argmin)


def test_minimizer_sample_floor(constants):
    with pytest.raises(ValueError):
        minimize_over_gamma(1.0, constants, n_samples=100)


def test_constant_field_spread(constants):
    for variant in Variant:
        assert constant_field_energy_spread(constants, variant, samples=400) <= 1e-10


def test_two_term(constants):
    assert two_term_eigenvalue(1e-3, 0.5, constants) == pytest.approx(
        constants.theta0 * 1e-3 + 0.5 * 1e-4, rel=1e-12)
    with pytest.raises(ValueError):
        two_term_eigenvalue(0.0, 0.5, constants)
