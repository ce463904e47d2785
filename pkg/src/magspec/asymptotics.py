"""Effective boundary energy along Gamma and the two-term eigenvalue expansion.

The second-order coefficient of the ground energy is the minimum over Gamma
of an effective energy built from the magnetic curvature ``kappa_nB`` and the
angle between the field and Gamma. Two forms of the angular factor are
available: ``SquaredBT`` uses ``(B.T)^2`` and ``LinearBT`` uses ``|B.T|``.
On the helical ball they predict different minimizers, so both are kept
and ``LinearBT`` is the default.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .geometry import BRANCHES, gamma_branch
from .model1d import SpectralConstants

CLUSTER_TOL = 1e-6


class Variant(str, Enum):
    SQUARED_BT = "squared"
    LINEAR_BT = "linear"


class Regime(str, Enum):
    SUB_THRESHOLD = "sub-threshold"
    SUPER_THRESHOLD = "super-threshold"


def _prefactor(constants: SpectralConstants) -> float:
    if constants is None:
        raise ValueError("spectral constants are required")
    return 2.0 ** (-2.0 / 3.0) * constants.nu0_hat * constants.delta0 ** (1.0 / 3.0)


def gamma_tilde(kappa: float, bt: float, constants: SpectralConstants,
                variant: Variant = Variant.LINEAR_BT) -> float:
    """Effective energy density at a Gamma point with magnetic curvature ``kappa``."""
    variant = Variant(variant)
    if not kappa > 0:
        raise ValueError(f"magnetic curvature must be positive, got {kappa}")
    if abs(bt) > 1.0 + 1e-12:
        raise ValueError(f"|B.T| must not exceed 1, got {bt}")
    a = abs(bt) if variant is Variant.LINEAR_BT else bt * bt
    return _prefactor(constants) * kappa ** (2.0 / 3.0) * (1.0 - (1.0 - constants.delta0) * a) ** (1.0 / 3.0)


def c_conj(gamma: float, theta: float, constants: SpectralConstants) -> float:
    """Second-order constant of the model operator with curvature ``gamma`` and angle ``theta``."""
    d0 = constants.delta0
    ang = d0 * np.sin(theta) ** 2 + np.cos(theta) ** 2
    return float(2.0 ** (-2.0 / 3.0) * d0 ** (1.0 / 3.0) * abs(gamma) ** (2.0 / 3.0)
                 * ang ** (1.0 / 3.0) * constants.nu0_hat)


def tau0(delta0: float) -> float:
    """Pitch threshold separating two and four minimizers on the helical ball."""
    if not (0.0 < delta0 < 1.0):
        raise ValueError(f"delta0 must lie in (0, 1), got {delta0}")
    inner = 1.0 / np.sqrt(delta0 + delta0 * (1.0 - delta0)) - 1.0
    return float(np.sqrt(inner) / np.sqrt(2.0))


def f_v(v, mu0: float):
    """Cubed angular energy on the helical ball as a function of ``v = tau (1 - x3^2)``."""
    v = np.asarray(v, dtype=float)
    return 1.0 + v * v - mu0 * v * np.sqrt(1.0 + v * v)


def f_prime(v, mu0: float):
    v = np.asarray(v, dtype=float)
    return 2.0 * v - mu0 * (1.0 + 2.0 * v * v) / np.sqrt(1.0 + v * v)


def brute_force_threshold(delta0: float, v_max: float = 5.0, samples: int = 20001) -> float:
    """Minimizer of ``f`` on ``[0, v_max]`` by dense sampling and a root polish of ``f'``."""
    mu0 = 1.0 - delta0
    v = np.linspace(0.0, v_max, samples)
    i = int(np.argmin(f_v(v, mu0)))
    lo, hi = v[max(i - 1, 0)], v[min(i + 1, samples - 1)]
    if f_prime(lo, mu0) < 0 < f_prime(hi, mu0):
        return float(brentq(f_prime, lo, hi, args=(mu0,), xtol=1e-15, rtol=1e-15))
    return float(v[i])


def helical_energy(x3, tau: float, constants: SpectralConstants,
                   variant: Variant = Variant.LINEAR_BT):
    """Effective energy on the helical Gamma as a function of the height ``x3``."""
    x3 = np.asarray(x3, dtype=float)
    return _energy_of_u(1.0 - x3 * x3, tau, constants, Variant(variant))


@dataclass
class MinimizationReport:
    gamma_hat: float
    argmin: list
    tau0: float
    regime: Regime
    variant: Variant
    argmin_x3: list = field(default_factory=list)
    samples: int = 0
    sample_min: float = np.inf


def _chart_heights(branch, params, tau):
    return np.array([gamma_branch(branch, p, tau)[2] for p in params])


def _sample_charts(tau, n_samples):
    """Dense parameter samples of all four charts with their heights."""
    edge = 1.0 - 1e-9
    p = np.linspace(-edge, edge, n_samples)
    out = []
    for br in BRANCHES:
        out.append((br, p, _chart_heights(br, p, tau)))
    return out


def _energy_of_u(u, tau, constants, variant):
    u = np.asarray(u, dtype=float)
    kn = np.sqrt(1.0 + tau * tau * u * u)
    bt = tau * u / kn
    a = bt if variant is Variant.LINEAR_BT else bt * bt
    return _prefactor(constants) * kn ** (2.0 / 3.0) * (1.0 - (1.0 - constants.delta0) * a) ** (1.0 / 3.0)


def _polish_u(u0, du, tau, constants, variant):
    """Minimize over ``u = 1 - x3^2`` near ``u0``; snap to 0 or 1 when the end is no worse.

    The energy depends on the Gamma point only through ``u``. Working in
    ``u`` keeps the polish well conditioned where the minimum is flat in the
    chart parameter (quartic at the poles and at the threshold pitch).
    """
    lo, hi = max(u0 - du, 0.0), min(u0 + du, 1.0)
    res = minimize_scalar(lambda u: float(_energy_of_u(u, tau, constants, variant)),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-14, "maxiter": 500})
    u, fv = float(res.x), float(res.fun)
    slack = 1e-14 * max(1.0, abs(fv))
    for end in (lo, hi):
        if end in (0.0, 1.0):
            fe = float(_energy_of_u(end, tau, constants, variant))
            if fe <= fv + slack:
                u, fv = end, min(fe, fv)
    return u, fv


def _points_at_u(u, tau):
    """All Gamma points with ``1 - x3^2 = u``."""
    if u <= 0.0:
        return [np.array([0.0, 0.0, -1.0]), np.array([0.0, 0.0, 1.0])]
    z = np.sqrt(max(1.0 - u, 0.0))
    heights = [0.0] if z == 0.0 else [-z, z]
    return [gamma_branch(br, x3, tau) for br in ("c1", "c2") for x3 in heights]


def minimize_over_gamma(tau: float, constants: SpectralConstants,
                        variant: Variant = Variant.LINEAR_BT,
                        n_samples: int = 4000) -> MinimizationReport:
    """Global minimizers of the effective energy on the helical Gamma.

    Every chart is sampled densely, each discrete local minimum near the
    global one is polished by bounded Brent, and polished points closer
    than ``CLUSTER_TOL`` in space are merged. Symmetric copies are kept.
    """
    variant = Variant(variant)
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    t0 = tau0(constants.delta0)
    charts = _sample_charts(tau, n_samples)
    values = [helical_energy(x3, tau, constants, variant) for _, _, x3 in charts]
    finite = np.concatenate([v[np.isfinite(v)] for v in values])
    if finite.size == 0:
        raise RuntimeError("effective energy produced no finite samples")
    sample_min = float(np.min(finite))
    spread = float(np.max(finite) - sample_min)
    accept = sample_min + max(1e-3 * spread, 1e-12)
    candidates = []
    for (br, p, x3), val in zip(charts, values):
        u = 1.0 - x3 * x3
        # chart endpoints are skipped: every point of Gamma is interior to some chart
        for i in range(1, len(p) - 1):
            if val[i] <= val[i - 1] and val[i] <= val[i + 1] and val[i] <= accept:
                du = 2.0 * max(abs(u[i + 1] - u[i]), abs(u[i] - u[i - 1]), 1e-12)
                uu, fv = _polish_u(u[i], du, tau, constants, variant)
                candidates.extend((fv, x) for x in _points_at_u(uu, tau))
    best = min(fv for fv, _ in candidates)
    tol = 1e-10 * max(1.0, abs(best))
    points = []
    for fv, x in sorted(candidates, key=lambda c: c[0]):
        if fv > best + tol:
            continue
        if all(np.linalg.norm(x - y) > CLUSTER_TOL for y in points):
            points.append(x)
    points.sort(key=lambda x: (round(x[2], 9), round(x[1], 9), round(x[0], 9)))
    regime = Regime.SUB_THRESHOLD if tau <= t0 else Regime.SUPER_THRESHOLD
    return MinimizationReport(gamma_hat=float(best), argmin=points, tau0=t0, regime=regime,
                              variant=variant, argmin_x3=[float(x[2]) for x in points],
                              samples=n_samples * len(BRANCHES), sample_min=sample_min)


def predicted_minimizers(tau: float, delta0: float):
    """Closed-form minimizer set of the ``LinearBT`` energy on the helical ball."""
    t0 = tau0(delta0)
    if tau <= t0:
        return [np.array([0.0, -1.0, 0.0]), np.array([0.0, 1.0, 0.0])]
    q = np.sqrt(t0 / tau)
    z = np.sqrt(1.0 - t0 / tau)
    pts = []
    for s in (1.0, -1.0):
        pts.append(np.array([s * q * np.sin(tau * z), -s * q * np.cos(tau * z), z]))
        pts.append(np.array([s * q * np.sin(tau * z), s * q * np.cos(tau * z), -z]))
    return pts


def predicted_gamma_hat(tau: float, constants: SpectralConstants) -> float:
    """Closed-form minimum of the ``LinearBT`` energy, through ``f`` at the minimizing ``v``."""
    d0 = constants.delta0
    v = min(tau, tau0(d0))
    return float(_prefactor(constants) * f_v(v, 1.0 - d0) ** (1.0 / 3.0))


def constant_field_energy_spread(constants: SpectralConstants, variant=Variant.LINEAR_BT,
                                 samples: int = 2000) -> float:
    """Spread of the effective energy along the equator for a constant vertical field."""
    # on the equator B.N = 0, B is normal to Gamma and kappa_nB = 1 at every point
    from .geometry import ConstantField, ball_kappa_nB, curve_frame, equator_curve

    curve = equator_curve()
    field_ = ConstantField()
    vals = []
    for p in np.linspace(0.0, 2 * np.pi, samples, endpoint=False):
        T, V, N = curve_frame(curve, p)
        x = curve.position(p)
        vals.append(gamma_tilde(ball_kappa_nB(field_, x, T, V), float(field_(x) @ T),
                                constants, variant))
    vals = np.array(vals)
    return float(vals.max() - vals.min())


def two_term_eigenvalue(h: float, gamma_hat: float, constants: SpectralConstants) -> float:
    if not h > 0:
        raise ValueError("h must be positive")
    return float(constants.theta0 * h + gamma_hat * h ** (4.0 / 3.0))
