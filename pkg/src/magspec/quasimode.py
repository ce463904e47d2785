"""Trial state for the upper bound and its energy in the boundary-layer model.

The trial state lives in rescaled variables ``r_hat = h^(-1/3) r`` and
``t_hat = h^(-1/2) t``:

    w_h = phi0 psi + h^(1/6) phi1 (L psi) + h^(1/3) phi2 (L^2 psi),
    L   = sin(theta) D_r - (1/2) cos(theta) gamma (r^2 - rho),

multiplied by smooth cut-offs in both variables, and ``v = h^(-5/12) v0``.
The ``t``-profiles ``phi_k`` come from the half-line oscillator at its band
minimum and ``psi`` is a rescaled, phase-shifted ground state of the quartic
model.

Every object here is a finite sum of products ``a(r) b(t)``, so all the
integrals below reduce to small Gram matrices of one-dimensional integrals.
"""

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from .eigencore import Grid1D
from .model1d import (SpectralConstants, default_constants, degennes_grid, degennes_ground_state,
                      degennes_operator_apply, find_degennes_min, montgomery_ground_state,
                      regularized_resolvent)

DEFAULT_DELTA = 0.3
DEFAULT_C0 = 20.0
DEFAULT_DR = 0.01
CHAIN_TOL = 1e-7
METRIC_FLOOR = 0.5
TAIL_TOL = 1e-12

# 8th-order centred first-derivative stencil
_D1_STENCIL = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])


@dataclass(frozen=True)
class QuasimodeParams:
    theta: float
    kappa: float
    gamma: float
    h: float
    delta: float = DEFAULT_DELTA
    C0: float = DEFAULT_C0

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if not (5.0 / 18.0 < self.delta < 1.0 / 3.0):
            raise ValueError(f"delta must lie in (5/18, 1/3), got {self.delta}")
        if not self.C0 > 0:
            raise ValueError("C0 must be positive")


# --------------------------------------------------------------------------
# Cut-off
# --------------------------------------------------------------------------

def _smooth_step(y):
    """0 for y <= 0, 1 for y >= 1, C-infinity in between."""
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)
        b = np.where(y < 1, np.exp(-1.0 / np.where(y < 1, 1.0 - y, 1.0)), 0.0)
    return a / (a + b)


def bump(x):
    """Even plateau function: 1 on [-1/4, 1/4], 0 outside (-1/2, 1/2)."""
    return _smooth_step((0.5 - np.abs(np.asarray(x, dtype=float))) / 0.25)


def bump_l2(n: int = 20001) -> float:
    x = np.linspace(-0.5, 0.5, n)
    return float(np.trapezoid(bump(x) ** 2, x))


def chi_h(s, h: float, delta: float = DEFAULT_DELTA, C0: float = DEFAULT_C0):
    """Tangential cut-off normalized in L2; the constant is fixed by quadrature."""
    c1 = 1.0 / np.sqrt(C0 * bump_l2())
    return c1 * h ** (-delta / 2) * bump(np.asarray(s) / (C0 * h ** delta))


# --------------------------------------------------------------------------
# t-profiles
# --------------------------------------------------------------------------

@dataclass
class PhiChain:
    grid: Grid1D
    xi0: float
    theta0: float          # discrete ground energy on this grid
    phi0: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    residuals: dict = field(default_factory=dict)

    @property
    def mu2(self) -> float:
        """Second-order band coefficient recovered from the chain."""
        t = self.grid.nodes
        return 1.0 - 2.0 * self.grid.integrate((t - self.xi0) * self.phi1 * self.phi0)


def _l2(grid, f):
    return float(np.sqrt(grid.integrate(f * f)))


def build_phi_chain(constants: SpectralConstants = None, grid: Grid1D = None) -> PhiChain:
    """Ground state and the two correctors of the half-line oscillator at its minimum.

    The band minimum is taken on ``grid`` itself so that the first source is
    orthogonal to the discrete ground state up to the minimizer tolerance.
    """
    constants = constants or default_constants()
    if grid is None or grid == constants.degennes_grid:
        grid = constants.degennes_grid or degennes_grid()
        xi = constants.xi0_grid
    else:
        xi, _ = find_degennes_min(grid)
    g0 = degennes_ground_state(xi, grid)
    t = grid.nodes
    tau = t - xi
    phi0 = g0.values
    phi1 = regularized_resolvent(2.0 * tau * phi0, g0, xi)
    src2 = tau * phi1 - grid.integrate(tau * phi1 * phi0) * phi0
    phi2 = regularized_resolvent(2.0 * src2, g0, xi)
    lam = g0.eigenvalue

    def resid(w, rhs):
        return _l2(grid, degennes_operator_apply(w, xi, grid) - lam * w - rhs)

    res = {
        "phi1": resid(phi1, 2.0 * tau * phi0),
        "phi2": resid(phi2, 2.0 * src2),
        "phi1_dot_phi0": float(grid.integrate(phi1 * phi0)),
        "phi2_dot_phi0": float(grid.integrate(phi2 * phi0)),
        "phi0_norm": _l2(grid, phi0),
        "source_dot_phi0": float(grid.integrate(tau * phi0 * phi0)),
    }
    return PhiChain(grid=grid, xi0=float(xi), theta0=float(lam), phi0=phi0, phi1=phi1, phi2=phi2,
                    residuals=res)


# --------------------------------------------------------------------------
# r-profile
# --------------------------------------------------------------------------

@dataclass
class PsiProfile:
    r: np.ndarray
    psi: np.ndarray
    c: float
    d: float
    rho: float
    alpha_theta: float
    scale: float

    @property
    def spacing(self) -> float:
        return float(self.r[1] - self.r[0])

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.psi) ** 2) * self.spacing))


def angle_factor(theta: float, delta0: float) -> float:
    return float(np.cos(theta) ** 2 + delta0 * np.sin(theta) ** 2)


def phase_slope(theta: float, delta0: float) -> float:
    """Coefficient of the gauge phase that removes the cross term of the effective operator."""
    return float(np.sin(theta) * np.cos(theta) * (1.0 - delta0) / angle_factor(theta, delta0))


def derivative(f: np.ndarray, dr: float) -> np.ndarray:
    """8th-order centred first derivative; values beyond the ends are taken as zero."""
    pad = np.concatenate([np.zeros(4, dtype=f.dtype), f, np.zeros(4, dtype=f.dtype)])
    out = np.zeros_like(f)
    n = f.shape[0]
    for k, w in enumerate(_D1_STENCIL):
        if w != 0.0:
            out += w * pad[k:k + n]
    return out / dr


def r_grid(half_width: float, dr: float = DEFAULT_DR) -> np.ndarray:
    n = int(np.ceil(half_width / dr))
    return dr * np.arange(-n, n + 1)


def build_psi(params: QuasimodeParams, constants: SpectralConstants = None,
              ground=None, dr: float = DEFAULT_DR, half_width: float = None) -> PsiProfile:
    """Rescaled quartic-model ground state with the compensating phase.

    With ``c = cos^2 + delta0 sin^2`` and ``d = delta0 gamma^2 / (4 c)`` the
    effective operator ``c (D + alpha W)^2 + (delta0/c) W^2``,
    ``W = gamma (r^2 - rho)/2``, is unitarily equivalent to a scaled quartic
    model. ``psi`` is its exact minimizer within that family.
    """
    constants = constants or default_constants()
    if params.gamma == 0:
        raise ValueError("gamma = 0 makes the quartic scaling degenerate")
    d0 = constants.delta0
    c = angle_factor(params.theta, d0)
    d = d0 * params.gamma ** 2 / (4.0 * c)
    lam = (c / d) ** (1.0 / 6.0)
    if ground is None:
        rho0 = constants.rho0_grid
        ground = montgomery_ground_state(rho0, constants.montgomery_grid)
        rho_m = rho0
    else:
        rho_m = constants.rho0
    rho = lam ** 2 * rho_m
    alpha = phase_slope(params.theta, d0)
    gy = ground.grid
    reach = gy.b * lam
    if half_width is None:
        half_width = reach
    r = r_grid(min(half_width, reach), dr)
    spline = CubicSpline(np.concatenate([[gy.a], gy.nodes, [gy.b]]),
                         np.concatenate([[0.0], ground.values, [0.0]]))
    y = r / lam
    amp = np.where(np.abs(y) < gy.b, spline(np.clip(y, gy.a, gy.b)), 0.0)
    phase = -alpha * params.gamma * (r ** 3 / 6.0 - rho * r / 2.0)
    psi = lam ** -0.5 * np.exp(1j * phase) * amp
    return PsiProfile(r=r, psi=psi, c=c, d=d, rho=float(rho), alpha_theta=alpha, scale=lam)


def gaussian_psi(width: float, dr: float = DEFAULT_DR, half_width: float = None) -> PsiProfile:
    """Normalized real Gaussian used as a slowly varying stand-in for ``psi``."""
    half_width = half_width or 8.0 * width
    r = r_grid(half_width, dr)
    psi = (np.pi * width ** 2) ** -0.25 * np.exp(-r ** 2 / (2 * width ** 2))
    return PsiProfile(r=r, psi=psi.astype(complex), c=1.0, d=0.0, rho=0.0, alpha_theta=0.0,
                      scale=width)


# --------------------------------------------------------------------------
# separable sums
# --------------------------------------------------------------------------

Pieces = List[Tuple[np.ndarray, np.ndarray]]


def _gram_r(A, dr):
    M = np.array(A)
    return (np.conj(M) @ M.T) * dr


def _gram_t(B, grid):
    M = np.array(B)
    w = grid.weights * grid.spacing
    return (M * w) @ M.T


def _gram_t_cells(B, grid):
    """Cell-based Gram matrix of ``d/dt``; equals the Neumann stiffness form."""
    M = np.array(B)
    # the Dirichlet end is a zero beyond the last node
    M = np.concatenate([M, np.zeros((M.shape[0], 1))], axis=1)
    dM = np.diff(M, axis=1)
    return (dM @ dM.T) / grid.spacing


def _quadratic(pieces: Pieces, dr, grid, cells=False):
    A = [p[0] for p in pieces]
    B = [p[1] for p in pieces]
    Gt = _gram_t_cells(B, grid) if cells else _gram_t(B, grid)
    return float(np.real(np.sum(_gram_r(A, dr) * Gt)))


@dataclass
class TrialState:
    """The rescaled trial state as a sum of products, plus the unit conversions."""

    params: QuasimodeParams
    chain: PhiChain
    psi: PsiProfile
    r: np.ndarray
    r_parts: list
    t_parts: list
    t_cut: np.ndarray

    @property
    def dr(self) -> float:
        return float(self.r[1] - self.r[0])

    @property
    def pieces(self) -> Pieces:
        return list(zip(self.r_parts, self.t_parts))

    def norm2(self) -> float:
        """``||v||^2``; the rescaling preserves the L2 norm."""
        return _quadratic(self.pieces, self.dr, self.chain.grid)

    def moment(self, k: int, n: int) -> float:
        """``int r^k t^n |v|^2`` in physical units."""
        t = self.chain.grid.nodes
        pcs = [(a * np.abs(self.r) ** (k / 2) * np.sign(self.r) ** k, b * t ** (n / 2))
               for a, b in self.pieces]
        h = self.params.h
        return h ** (k / 3 + n / 2) * _quadratic(pcs, self.dr, self.chain.grid)

    def dt_energy(self) -> float:
        """``int |h D_t v|^2`` in physical units."""
        return self.params.h * _quadratic(self.pieces, self.dr, self.chain.grid, cells=True)

    def dr_energy(self) -> float:
        """``int |h D_r v|^2`` in physical units."""
        pcs = [(derivative(a, self.dr), b) for a, b in self.pieces]
        return self.params.h ** (4.0 / 3.0) * _quadratic(pcs, self.dr, self.chain.grid)

    def to_grid(self, physical: bool = True):
        """Dense ``v`` on the product grid (small grids only)."""
        v0 = sum(np.outer(a, b) for a, b in self.pieces)
        if not physical:
            return self.r, self.chain.grid.nodes, v0
        h = self.params.h
        return h ** (1 / 3) * self.r, h ** 0.5 * self.chain.grid.nodes, h ** (-5 / 12) * v0


def apply_L(psi_vals, r, dr, params: QuasimodeParams, rho: float):
    s, c = np.sin(params.theta), np.cos(params.theta)
    return s * (-1j) * derivative(psi_vals, dr) - 0.5 * c * params.gamma * (r ** 2 - rho) * psi_vals


def assemble_v(params: QuasimodeParams, chain: PhiChain, psi: PsiProfile) -> TrialState:
    h = params.h
    eps = h ** (1.0 / 6.0)
    r = psi.r
    dr = psi.spacing
    t = chain.grid.nodes
    r_cut_width = params.C0 * h ** (params.delta - 1.0 / 3.0)
    t_cut_width = params.C0 * h ** (params.delta - 0.5)
    if r[-1] > 0.5 * r_cut_width + 1e-12:
        # the r-grid is clipped to the cut-off support
        keep = np.abs(r) <= 0.5 * r_cut_width
        r = r[keep]
        psi_vals = psi.psi[keep]
    else:
        psi_vals = psi.psi
    if chain.grid.b < 0.5 * t_cut_width and np.abs(chain.phi0[-10:]).max() > 1e-12:
        raise ValueError("t-grid ends before the profiles have decayed inside the cut-off")
    chi_r = bump(r / r_cut_width)
    chi_t = bump(t / t_cut_width)
    L1 = apply_L(psi_vals, r, dr, params, psi.rho)
    L2 = apply_L(L1, r, dr, params, psi.rho)
    r_parts = [chi_r * psi_vals, chi_r * L1, chi_r * L2]
    t_parts = [chi_t * chain.phi0, eps * chi_t * chain.phi1, eps ** 2 * chi_t * chain.phi2]
    return TrialState(params=params, chain=chain, psi=psi, r=r, r_parts=r_parts,
                      t_parts=t_parts, t_cut=chi_t)


def energy_qM00(v: TrialState, params: QuasimodeParams = None) -> float:
    """Boundary-layer quadratic form of the trial state, in physical units."""
    params = params or v.params
    h = params.h
    eps = h ** (1.0 / 6.0)
    s, c = np.sin(params.theta), np.cos(params.theta)
    r, dr = v.r, v.dr
    t = v.chain.grid.nodes
    tau = t - v.chain.xi0
    grid = v.chain.grid
    metric = 1.0 + 2.0 * params.kappa * eps ** 2 * r
    keep = metric >= METRIC_FLOOR
    # nodes where the metric factor degenerates are dropped from the quadrature
    # grid, provided the trial state is negligible there
    tail = sum(np.sum(np.abs(a[~keep]) ** 2) * dr * grid.integrate(b * b) for a, b in v.pieces)
    if tail > TAIL_TOL:
        raise ValueError(f"1 + 2 kappa r degenerates where the trial state has mass {tail:.2e}")
    r = r[keep]
    m = np.sqrt(metric[keep])
    W = 0.5 * params.gamma * (r ** 2 - v.psi.rho)
    first, second = [], []
    for a_full, b in v.pieces:
        da = derivative(a_full, dr)[keep]
        a = a_full[keep]
        first.append((eps * (-1j) * da, b))
        first.append((-s * a, tau * b))
        second.append((m * a, -c * tau * b))
        second.append((eps ** 2 * params.kappa * c * m * r * a, t * b))
        second.append((-eps * m * W * a, b))
    q_hat = (_quadratic(first, dr, grid) + _quadratic(second, dr, grid)
             + _quadratic(v.pieces, dr, grid, cells=True))
    return h * q_hat


def energy_ratio(v: TrialState, theta0: float = None) -> float:
    """``(q / ||v||^2 - Theta0 h) / h^(4/3)``.

    The default ``Theta0`` is the discrete ground energy of the chain's grid,
    which is the value the trial state actually reproduces.
    """
    th0 = v.chain.theta0 if theta0 is None else theta0
    h = v.params.h
    return (energy_qM00(v) / v.norm2() - th0 * h) / h ** (4.0 / 3.0)


def trial_state(params: QuasimodeParams, constants: SpectralConstants = None,
                chain: PhiChain = None, dr: float = DEFAULT_DR) -> TrialState:
    constants = constants or default_constants()
    chain = chain or build_phi_chain(constants)
    psi = build_psi(params, constants, dr=dr)
    return assemble_v(params, chain, psi)


# --------------------------------------------------------------------------
# helical ball and sweeps
# --------------------------------------------------------------------------

@dataclass
class GammaInputs:
    theta: float
    kappa: float
    gamma: float
    position: np.ndarray
    branch: str
    param: float
    target: float


def helical_inputs(tau: float, constants: SpectralConstants = None, variant="linear",
                   n_samples: int = 4000) -> GammaInputs:
    """Model parameters at the first minimizer of the effective energy on the helical Gamma.

    ``theta = arcsin(B.T)``, ``kappa`` is the geodesic curvature and
    ``gamma`` the magnetic curvature there.
    """
    from .asymptotics import c_conj, minimize_over_gamma
    from .geometry import chart_for_x3, gamma_branch, gamma_point

    constants = constants or default_constants()
    rep = minimize_over_gamma(tau, constants, variant, n_samples=n_samples)
    x = rep.argmin[0]
    for sheet in (1, -1):
        br, p = chart_for_x3(x[2], sheet)
        if np.linalg.norm(gamma_branch(br, p, tau) - x) < 1e-8:
            break
    else:
        raise RuntimeError("minimizer does not lie on a chart of Gamma")
    pt = gamma_point(p, br, tau, with_normal_form=False)
    theta = float(np.arcsin(np.clip(pt.b_dot_t, -1.0, 1.0)))
    return GammaInputs(theta=theta, kappa=float(pt.kappa_g), gamma=float(pt.kappa_nB),
                       position=np.asarray(x), branch=br, param=float(p),
                       target=c_conj(pt.kappa_nB, theta, constants))


@dataclass
class QuasimodeRow:
    h: float
    norm2: float
    energy: float
    ratio: float
    moment_r2: float
    moment_t2: float
    dt_energy: float
    dr_energy: float


def quasimode_row(params: QuasimodeParams, constants: SpectralConstants = None,
                  chain: PhiChain = None, dr: float = DEFAULT_DR) -> QuasimodeRow:
    constants = constants or default_constants()
    chain = chain or build_phi_chain(constants)
    v = trial_state(params, constants, chain, dr)
    q = energy_qM00(v)
    n2 = v.norm2()
    h = params.h
    return QuasimodeRow(h=h, norm2=n2, energy=q, ratio=(q / n2 - chain.theta0 * h) / h ** (4.0 / 3.0),
                        moment_r2=v.moment(2, 0), moment_t2=v.moment(0, 2),
                        dt_energy=v.dt_energy(), dr_energy=v.dr_energy())


def extrapolate_ratio(h_list, ratios, order: int = 2) -> float:
    """Limit of the energy ratio from a polynomial fit in ``h^(1/6)``."""
    e = np.asarray(h_list, dtype=float) ** (1.0 / 6.0)
    coef = np.polyfit(e, np.asarray(ratios, dtype=float), order)
    return float(coef[-1])
