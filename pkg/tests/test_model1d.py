"""Band constants against oracles computed independently, then frozen.

Half-line values: parabolic cylinder functions (scipy.special.pbdv), the
Neumann condition solved by a root finder and minimized over xi.
Quartic-model values: Galerkin in 160 Hermite functions.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from magspec.model1d import (compute_constants, degennes_dmu, degennes_grid, degennes_ground_state,
                             degennes_mu, find_degennes_min, montgomery_dmu, montgomery_grid,
                             montgomery_ground_state, montgomery_mu, regularized_resolvent,
                             degennes_operator_apply)

THETA0_ORACLE = 0.59010612495
XI0_ORACLE = 0.76818365314
DELTA0_ORACLE = 0.5855128
NU0_ORACLE = 0.90453337134
RHO0_ORACLE = 0.43688821


def test_theta0_against_oracle(constants):
    assert constants.theta0 == pytest.approx(THETA0_ORACLE, abs=1e-9)
    assert constants.xi0 == pytest.approx(XI0_ORACLE, abs=1e-9)


def test_delta0_against_oracle(constants):
    assert constants.delta0 == pytest.approx(DELTA0_ORACLE, abs=1e-6)


def test_montgomery_against_oracle(constants):
    assert constants.nu0_hat == pytest.approx(NU0_ORACLE, abs=1e-9)
    assert constants.rho0 == pytest.approx(RHO0_ORACLE, abs=1e-7)
    assert constants.montgomery_curvature > 0


def test_ground_state_positive_and_normalized(constants):
    g = degennes_ground_state(constants.xi0_grid, constants.degennes_grid)
    assert g.norm == pytest.approx(1.0, abs=1e-12)
    assert np.all(g.values[:-1] > 0)


@given(st.floats(min_value=0.2, max_value=2.0))
@settings(max_examples=15, deadline=None)
def test_band_above_theta0(xi):
    grid = degennes_grid(n=1000)
    assert degennes_mu(xi, grid).value >= find_degennes_min(grid)[1] - 1e-12


@given(st.floats(min_value=0.3, max_value=1.5))
@settings(max_examples=10, deadline=None)
def test_feynman_hellmann_matches_difference(xi):
    grid = degennes_grid(n=1500)
    fd = (degennes_mu(xi + 1e-4, grid).value - degennes_mu(xi - 1e-4, grid).value) / 2e-4
    assert degennes_dmu(xi, grid) == pytest.approx(fd, abs=1e-6)


def test_montgomery_dmu_matches_difference():
    grid = montgomery_grid(n=1500)
    for rho in (-0.5, 0.2, 1.0):
        fd = (montgomery_mu(rho + 1e-4, grid).value - montgomery_mu(rho - 1e-4, grid).value) / 2e-4
        assert montgomery_dmu(rho, grid) == pytest.approx(fd, abs=1e-6)


def test_degennes_grid_too_short():
    with pytest.raises(ValueError):
        degennes_mu(5.0, degennes_grid(L=4.0, n=200))


def test_resolvent_solves_and_is_orthogonal(constants):
    grid = constants.degennes_grid
    xi = constants.xi0_grid
    g = degennes_ground_state(xi, grid)
    t = grid.nodes
    src = (t - xi) * g.values
    w = regularized_resolvent(src, g, xi)
    assert abs(grid.integrate(w * g.values)) < 1e-12
    lhs = degennes_operator_apply(w, xi, grid) - g.eigenvalue * w
    assert np.sqrt(grid.integrate((lhs - src) ** 2)) < 1e-8


def test_refinement_stability():
    coarse = compute_constants(degennes_grid(n=2000), montgomery_grid(n=2000))
    fine = compute_constants(degennes_grid(n=4000), montgomery_grid(n=4000))
    for k in ("theta0", "xi0", "nu0_hat", "rho0"):
        assert getattr(coarse, k) == pytest.approx(getattr(fine, k), abs=1e-6)
    assert coarse.delta0 == pytest.approx(fine.delta0, abs=1e-5)


def test_as_dict_keys(constants):
    d = constants.as_dict()
    for k in ("theta0", "xi0", "delta0", "nu0_hat", "rho0", "degennes_grid", "residuals"):
        assert k in d


def test_quartic_ground_state_even(constants):
    g = montgomery_ground_state(constants.rho0_grid, constants.montgomery_grid)
    assert np.abs(g.values - g.values[::-1]).max() < 1e-8
