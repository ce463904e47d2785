from dataclasses import replace

import numpy as np
import pytest

from magspec import model3d as m3
from magspec.eigencore import ConvergenceError, Grid3D


def tiny_box(nr=7, nt=7):
    return m3.default_box(R=8.0, T=8.0, nr=nr, nt=nt)


def _random_field(shape, rng):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _dense(params):
    shape = params.shape
    n = int(np.prod(shape))
    st = m3.build_stencil(params)
    cols = [st.apply(e.reshape(shape).astype(complex)).ravel() for e in np.eye(n)]
    return np.array(cols).T


def test_params_validation():
    with pytest.raises(ValueError):
        m3.ModelParams(gamma=1.0, theta=0.3, h=0.0)
    with pytest.raises(ValueError):
        m3.ModelParams(gamma=6.0, theta=0.3, h=0.1)
    with pytest.raises(ValueError):
        m3.ModelParams(gamma=1.0, theta=0.3, h=0.1, eta=-5.5)
    with pytest.raises(ValueError):
        m3.ModelParams(gamma=1.0, theta=0.3, h=0.1, box=m3.default_box(R=6.0))
    with pytest.raises(ValueError):
        m3.ModelParams(gamma=1.0, theta=0.3, h=0.1, box=m3.default_box(T=5.0))


def test_shape_mismatch_rejected():
    p = m3.ModelParams(gamma=1.0, theta=0.3, h=0.1, box=tiny_box())
    with pytest.raises(ValueError):
        m3.apply_P1(np.zeros((3, 3, 3)), p)


def test_operator_is_hermitian(rng):
    p = m3.ModelParams(gamma=1.2, theta=0.7, h=0.05, eta=0.5, zeta=-0.5, box=tiny_box(11, 9))
    u, v = _random_field(p.shape, rng), _random_field(p.shape, rng)
    lhs = np.vdot(v, m3.apply_P1(u, p))
    rhs = np.vdot(m3.apply_P1(v, p), u)
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


def test_physical_stencil_is_h_times_scaled(rng):
    for h in (0.1, 0.01):
        p = m3.ModelParams(gamma=1.0, theta=0.3, h=h, eta=0.4, zeta=-0.3, box=tiny_box(11, 9))
        u = _random_field(p.shape, rng)
        scaled = m3.build_stencil(p).apply(u)
        phys = m3.build_physical_stencil(p).apply(u)
        assert np.abs(phys - h * scaled).max() <= 1e-10 * np.abs(h * scaled).max()


def test_lowest_eigenvalue_matches_dense():
    p = m3.ModelParams(gamma=1.0, theta=0.3, h=0.1, eta=0.5, box=tiny_box())
    exact = np.linalg.eigvalsh(_dense(p))[0]
    res = m3.model_lambda1(p, tol=1e-8)
    assert res.converged
    assert res.lam == pytest.approx(exact, rel=1e-10)
    assert res.physical == pytest.approx(0.1 * exact, rel=1e-10)


def test_physical_solve_agrees():
    p = m3.ModelParams(gamma=1.0, theta=0.3, h=0.05, box=tiny_box(9, 9))
    a = m3.model_lambda1(p, tol=1e-8)
    b = m3.model_lambda1(p, tol=1e-8, physical=True)
    assert a.lam == pytest.approx(b.lam, rel=1e-10)


def test_reflection_maps_eta_zeta_to_opposite():
    box = tiny_box(9, 9)
    a = m3.model_lambda1(m3.ModelParams(gamma=1.0, theta=0.3, h=0.1, eta=0.5, zeta=0.3, box=box), tol=1e-8)
    b = m3.model_lambda1(m3.ModelParams(gamma=1.0, theta=0.3, h=0.1, eta=-0.5, zeta=-0.3, box=box), tol=1e-8)
    assert a.lam == pytest.approx(b.lam, rel=1e-10)
    # the reflected, conjugated ground state solves the opposite problem
    pb = b.params
    w = np.conj(m3.reflect(a.vector))
    resid = m3.apply_P1(w, pb) - a.lam * w
    assert np.linalg.norm(resid) <= 1e-6 * np.linalg.norm(w)


def test_identity_gap_decreases_quadratically():
    p = m3.ModelParams(gamma=1.0, theta=0.3, h=0.1, eta=0.5, zeta=-0.5)
    coarse = m3.box_with_counts(23, 15)
    gaps = [m3.identity_gap(replace(p, box=m3.refined_box(coarse, k))) for k in (1, 2)]
    assert gaps[1] < gaps[0]
    assert np.log2(gaps[0] / gaps[1]) > 1.2


def test_moment_orders():
    box = tiny_box()
    u = np.ones(box.shape, dtype=complex)
    assert m3.moment_decay(u, box, 0, 0.1) == pytest.approx(1.0)
    t = box.axes[2].nodes
    assert m3.moment_decay(u, box, 2, 0.01) == pytest.approx(0.01 * np.mean(t ** 2))
    with pytest.raises(ValueError):
        m3.moment_decay(u, box, 7, 0.1)


def test_sweep_reference_and_failures(monkeypatch):
    base = m3.ModelParams(gamma=1.0, theta=0.3, h=0.1, box=tiny_box())
    real = m3.model_lambda1

    def flaky(params, *a, **k):
        if params.eta < 0:
            raise ConvergenceError("forced failure")
        return real(params, *a, **k)

    monkeypatch.setattr(m3, "model_lambda1", flaky)
    cells = m3.eta_zeta_sweep(base, [-0.5, 0.0, 0.5], [0.0], [0.1, 0.05])
    assert len(cells) == 6
    by = {(c.h, c.eta): c for c in cells}
    assert by[(0.1, 0.0)].deviation == 0.0
    assert by[(0.1, -0.5)].status.startswith("failed")
    assert by[(0.05, 0.5)].status == "ok"
    assert np.isfinite(by[(0.05, 0.5)].deviation)
    with pytest.raises(ValueError):
        m3.eta_zeta_sweep(base, [9.0], [0.0], [0.1])


def test_fits_recover_exact_data():
    h = np.array([0.1, 0.05, 0.02, 0.01])
    a, b = m3.fit_two_term(h, 0.59 * h + 0.47 * h ** (4 / 3))
    assert (a, b) == pytest.approx((0.59, 0.47), rel=1e-10)
    C, e = m3.fit_power(h, 3.0 * h ** 1.7)
    assert (C, e) == pytest.approx((3.0, 1.7), rel=1e-10)
    with pytest.raises(ValueError):
        m3.fit_power(h, np.zeros(4))


def test_box_is_grid3d():
    assert isinstance(m3.default_box(), Grid3D)
    assert m3.default_box().shape == (95, 95, 64)
