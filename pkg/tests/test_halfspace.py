import numpy as np
import pytest

from magspec.eigencore import ConvergenceError
from magspec.halfspace import (HalfPlaneBox, box_for_angle, halfplane_matrix, lower_bound,
                               separated_value, sigma, sigma_at_zero, sigma_sweep)


def test_sigma_at_zero_is_theta0(constants):
    assert sigma_at_zero(constants) == constants.theta0


def test_separated_value_is_one():
    assert separated_value() == pytest.approx(1.0, abs=1e-4)


def test_matrix_symmetric():
    A, _ = halfplane_matrix(0.7, HalfPlaneBox(L1=6, L2=6, n1=20, n2=21))
    assert abs(A - A.T).max() < 1e-14


def test_coarsened_doubles_spacing():
    b = HalfPlaneBox(n1=40, n2=81)
    c = b.coarsened()
    assert np.allclose(np.array(c.spacing), 2 * np.array(b.spacing))
    with pytest.raises(ValueError):
        HalfPlaneBox(n1=41, n2=81).coarsened()


def test_box_grows_towards_normal():
    assert box_for_angle(1.4).L1 > box_for_angle(0.3).L1
    assert box_for_angle(1.56).L1 <= 80.0 + 1e-9


@pytest.mark.parametrize("nu", [0.0, 2.0])
def test_sigma_rejects_angles(nu):
    with pytest.raises(ValueError):
        sigma(nu)


def test_sigma_even_in_angle(constants):
    box = HalfPlaneBox(L1=15, L2=20, n1=60, n2=101)
    a = sigma(0.6, box, constants=constants, extrapolate=False)
    b = sigma(-0.6, box, constants=constants, extrapolate=False)
    assert a.value == b.value


def test_small_box_is_rejected(constants):
    with pytest.raises(ConvergenceError):
        sigma(0.5, HalfPlaneBox(L1=1.5, L2=1.5, n1=20, n2=21), constants=constants, auto_box=False)


def test_sweep_keeps_going(constants):
    out = sigma_sweep([0.5, 1.2], HalfPlaneBox(L1=15, L2=20, n1=60, n2=101), constants=constants,
                      extrapolate=False)
    assert [o.nu for o in out] == [0.5, 1.2]
    with pytest.raises(ValueError):
        sigma_sweep([1.0, 0.5])


def test_decoupled_oracle_at_small_angle(constants):
    """At small angle the valley is the half-line band evaluated at shifted momenta."""
    s = sigma(0.2, constants=constants)
    assert s.value >= lower_bound(0.2, constants.theta0) - 1e-3
    assert s.value < constants.theta0 + 0.8 * 0.2
