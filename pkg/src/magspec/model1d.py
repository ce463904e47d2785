"""Half-line and quartic band functions and their constants.

``degennes_*`` handles the Neumann oscillator ``D_t^2 + (t - xi)^2`` on t > 0.
``montgomery_*`` handles ``D_r^2 + (r^2 - rho)^2`` on the line.

The curvature constant ``delta0`` is half the second derivative of the
half-line band at its minimum, i.e. the coefficient of ``(xi - xi0)^2``. The
raw second derivative is kept as ``mu_pp``.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize
from scipy.linalg import solve_banded

from .eigencore import (BC, ConvergenceError, Grid1D, discretize_schrodinger_1d,
                        smallest_eig_tridiag, tridiag_matvec)

DEGENNES_L = 20.0
DEGENNES_N = 4000
MONTGOMERY_L = 10.0
MONTGOMERY_N = 4000
XI_BRACKET = (0.3, 1.5)
RHO_BRACKET = (-1.0, 2.0)
EIG_TOL = 1e-9


@dataclass
class BandSample:
    param: float
    value: float
    residual: float


@dataclass
class GroundProfile:
    """Nodal ground state, normalized in L2 and positive."""

    grid: Grid1D
    values: np.ndarray
    eigenvalue: float
    sym: np.ndarray = field(repr=False, default=None)

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.grid.integrate(self.values ** 2)))


@dataclass
class SpectralConstants:
    theta0: float
    xi0: float
    delta0: float
    nu0_hat: float
    rho0: float
    mu_pp: float = 0.0
    montgomery_curvature: float = 0.0
    degennes_grid: Grid1D = None
    montgomery_grid: Grid1D = None
    residuals: dict = field(default_factory=dict)

    @property
    def xi0_grid(self) -> float:
        """Discrete minimizer on ``degennes_grid``; use it with grid functions."""
        return self.residuals.get("xi0_grid", self.xi0)

    @property
    def rho0_grid(self) -> float:
        return self.residuals.get("rho0_grid", self.rho0)

    def as_dict(self) -> dict:
        return {
            "theta0": self.theta0,
            "xi0": self.xi0,
            "delta0": self.delta0,
            "mu_pp": self.mu_pp,
            "nu0_hat": self.nu0_hat,
            "rho0": self.rho0,
            "montgomery_curvature": self.montgomery_curvature,
            "degennes_grid": self.degennes_grid.describe() if self.degennes_grid else None,
            "montgomery_grid": self.montgomery_grid.describe() if self.montgomery_grid else None,
            "residuals": dict(self.residuals),
        }


def degennes_grid(L: float = DEGENNES_L, n: int = DEGENNES_N) -> Grid1D:
    return Grid1D(0.0, L, n, BC.NEUMANN, BC.DIRICHLET)


def montgomery_grid(L: float = MONTGOMERY_L, n: int = MONTGOMERY_N) -> Grid1D:
    return Grid1D(-L, L, n, BC.DIRICHLET, BC.DIRICHLET)


# --------------------------------------------------------------------------
# half-line oscillator
# --------------------------------------------------------------------------

def _check_degennes_grid(xi, grid):
    if grid.bc_left != BC.NEUMANN or grid.bc_right != BC.DIRICHLET or grid.a != 0.0:
        raise ValueError("half-line grid must be [0, L] with Neumann at 0 and Dirichlet at L")
    need = max(20.0, abs(xi) + 15.0)
    if grid.b < need - 1e-12:
        raise ValueError(f"domain [0, {grid.b}] too short for xi={xi}: need L >= {need}")


def _degennes_matrix(xi, grid):
    return discretize_schrodinger_1d(grid, lambda t: (t - xi) ** 2)


def _degennes_solve(xi, grid, tol):
    _check_degennes_grid(xi, grid)
    d, e = _degennes_matrix(xi, grid)
    return smallest_eig_tridiag(d, e, tol)


def degennes_mu(xi: float, grid: Grid1D = None, tol: float = EIG_TOL) -> BandSample:
    """Lowest Neumann eigenvalue of ``D_t^2 + (t - xi)^2`` on the half-line."""
    grid = grid or degennes_grid()
    res = _degennes_solve(float(xi), grid, tol)
    return BandSample(float(xi), res.value, res.residual)


def _profile(grid, res):
    v = res.vector
    u = grid.to_nodal(v)
    if u[np.argmax(np.abs(u) > 1e-3 * np.abs(u).max())] < 0:
        u, v = -u, -v
    return GroundProfile(grid, u, res.value, v)


def degennes_ground_state(xi: float, grid: Grid1D = None, tol: float = EIG_TOL) -> GroundProfile:
    grid = grid or degennes_grid()
    return _profile(grid, _degennes_solve(float(xi), grid, tol))


def degennes_dmu(xi: float, grid: Grid1D = None, tol: float = EIG_TOL) -> float:
    """First derivative of the band by the Feynman-Hellmann moment."""
    prof = degennes_ground_state(xi, grid, tol)
    t = prof.grid.nodes
    return -2.0 * prof.grid.integrate((t - xi) * prof.values ** 2)


def _check_descent(f, lo, hi):
    mid = 0.5 * (lo + hi)
    flo, fmid, fhi = f(lo), f(mid), f(hi)
    if not (flo > fmid and fhi > fmid):
        raise ValueError(f"bracket [{lo}, {hi}] is not a descent bracket: "
                         f"f = {flo:.6g}, {fmid:.6g}, {fhi:.6g}")


def _minimize_band(f, dfun, bracket, tol):
    lo, hi = bracket
    _check_descent(f, lo, hi)
    # Brent on the band, then polish on the root of its exact derivative
    opt = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-6})
    x = opt.x
    a, b = max(lo, x - 1e-2), min(hi, x + 1e-2)
    da, db = dfun(a), dfun(b)
    if da < 0 < db:
        x = optimize.brentq(dfun, a, b, xtol=tol, rtol=4 * np.finfo(float).eps)
    return x


def find_degennes_min(grid: Grid1D = None, tol: float = 1e-12,
                      bracket=XI_BRACKET) -> tuple:
    """Minimizer and minimum of the half-line band."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    grid = grid or degennes_grid()
    xi0 = _minimize_band(lambda x: degennes_mu(x, grid).value,
                         lambda x: degennes_dmu(x, grid), bracket, tol)
    return float(xi0), degennes_mu(xi0, grid).value


def _five_point_second(f, x, h):
    return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h)


def band_curvatures(f, x0, steps=(0.02, 0.04, 0.08), fit_halfwidth=0.15, fit_points=31):
    """Two independent estimates of f''(x0): stepped differences and a local fit."""
    cache = {}

    def fc(x):
        key = round(x, 14)
        if key not in cache:
            cache[key] = f(x)
        return cache[key]

    diffs = [_five_point_second(fc, x0, h) for h in steps]
    # Richardson on the two finest steps; the truncation error is O(h^4)
    fd = diffs[0] + (diffs[0] - diffs[1]) / 15.0
    xs = x0 + np.linspace(-fit_halfwidth, fit_halfwidth, fit_points)
    ys = np.array([fc(x) for x in xs])
    # quartic fit so that the x^4 term does not bias the quadratic one
    coef = np.polynomial.polynomial.polyfit(xs - x0, ys, 6)
    fit = 2.0 * coef[2]
    return fd, fit, diffs


def degennes_delta0(xi0: float, grid: Grid1D = None, agree: float = 1e-4) -> float:
    """Curvature constant: half the second derivative of the band at xi0."""
    fd, fit, _ = band_curvatures(lambda x: degennes_mu(x, grid).value, xi0)
    if abs(fd - fit) / 2 > agree:
        raise ConvergenceError(f"curvature estimators disagree: differences {fd / 2:.8f}, "
                               f"fit {fit / 2:.8f}")
    return 0.5 * fd


def regularized_resolvent(u: np.ndarray, phi0: GroundProfile, xi0: float,
                          max_cond: float = 1e12) -> np.ndarray:
    """Solve ``(H(xi0) - lam0) w = u - <u, phi0> phi0`` with ``w`` orthogonal to phi0.

    ``u`` and the result are nodal functions on ``phi0.grid``; ``lam0`` is the
    discrete ground energy carried by ``phi0``.
    """
    grid = phi0.grid
    d, e = _degennes_matrix(xi0, grid)
    lam0 = phi0.eigenvalue
    p = phi0.sym / np.linalg.norm(phi0.sym)
    f = grid.from_nodal(np.asarray(u, dtype=float))
    f = f - np.dot(p, f) * p
    # the shifted matrix is singular along phi0 only; its condition on the
    # complement is ||T|| / gap
    cond = (np.abs(d).max() + 2 * np.abs(e).max()) / max(_second_gap(d, e, lam0), 1e-300)
    if cond > max_cond:
        raise ConvergenceError(f"resolvent system ill conditioned: estimate {cond:.3e}")
    ab = np.zeros((3, d.shape[0]))
    ab[0, 1:] = e
    ab[1] = d - lam0
    ab[2, :-1] = e
    w = np.zeros_like(f)
    for _ in range(3):
        r = f - tridiag_matvec(d - lam0, e, w)
        r = r - np.dot(p, r) * p
        dw = solve_banded((1, 1), ab, r, check_finite=False)
        w = w + dw - np.dot(p, dw) * p
    return grid.to_nodal(w)


def _second_gap(d, e, lam0):
    """Distance from lam0 to the second eigenvalue, by Sturm counting."""
    from . import kernels

    off2 = e * e
    lo, hi = lam0, lam0 + 1.0
    while kernels.sturm_count(d, off2, hi) < 2:
        hi = lam0 + 2 * (hi - lam0)
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if kernels.sturm_count(d, off2, mid) >= 2:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi) - lam0


def degennes_operator_apply(w: np.ndarray, xi: float, grid: Grid1D) -> np.ndarray:
    """Nodal ``H(xi) w`` consistent with the discrete eigenproblem."""
    d, e = _degennes_matrix(xi, grid)
    ws = grid.from_nodal(w)
    return grid.to_nodal(tridiag_matvec(d, e, ws))


# --------------------------------------------------------------------------
# quartic model on the line
# --------------------------------------------------------------------------

def _check_montgomery_grid(rho, grid):
    if grid.bc_left != BC.DIRICHLET or grid.bc_right != BC.DIRICHLET or grid.a != -grid.b:
        raise ValueError("quartic-model grid must be symmetric [-L, L] with Dirichlet ends")
    need = 8.0 + np.sqrt(max(rho, 0.0))
    if grid.b < need - 1e-12:
        raise ValueError(f"domain [-{grid.b}, {grid.b}] too short for rho={rho}: need L >= {need}")


def _montgomery_solve(rho, grid, tol):
    _check_montgomery_grid(rho, grid)
    d, e = discretize_schrodinger_1d(grid, lambda r: (r * r - rho) ** 2)
    return smallest_eig_tridiag(d, e, tol)


def montgomery_mu(rho: float, grid: Grid1D = None, tol: float = EIG_TOL) -> BandSample:
    """Lowest eigenvalue of ``D_r^2 + (r^2 - rho)^2``."""
    grid = grid or montgomery_grid()
    res = _montgomery_solve(float(rho), grid, tol)
    return BandSample(float(rho), res.value, res.residual)


def montgomery_ground_state(rho: float, grid: Grid1D = None, tol: float = EIG_TOL) -> GroundProfile:
    grid = grid or montgomery_grid()
    return _profile(grid, _montgomery_solve(float(rho), grid, tol))


def montgomery_dmu(rho: float, grid: Grid1D = None) -> float:
    prof = montgomery_ground_state(rho, grid)
    r = prof.grid.nodes
    return -2.0 * prof.grid.integrate((r * r - rho) * prof.values ** 2)


def find_montgomery_min(grid: Grid1D = None, tol: float = 1e-12,
                        bracket=RHO_BRACKET) -> tuple:
    """Minimizer, minimum and second derivative of the quartic band."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    grid = grid or montgomery_grid()
    f = lambda x: montgomery_mu(x, grid).value
    rho0 = _minimize_band(f, lambda x: montgomery_dmu(x, grid), bracket, tol)
    curv = _five_point_second(f, rho0, 0.02)
    return float(rho0), f(rho0), float(curv)


# --------------------------------------------------------------------------
# bundle
# --------------------------------------------------------------------------

def _degennes_bundle(grid, tol):
    xi0, theta0 = find_degennes_min(grid, tol)
    fd, fit, _ = band_curvatures(lambda x: degennes_mu(x, grid).value, xi0)
    return np.array([xi0, theta0, fd, fit])


def _montgomery_bundle(grid, tol):
    return np.array(find_montgomery_min(grid, tol))


def _richardson(coarse, fine):
    # both bundles carry O(spacing^2) errors and the spacing halves
    return (4.0 * fine - coarse) / 3.0


def compute_constants(dg_grid: Grid1D = None, mont_grid: Grid1D = None,
                      tol: float = 1e-12, extrapolate: bool = True) -> SpectralConstants:
    """All band constants.

    With ``extrapolate`` the values are Richardson-extrapolated from the given
    grids and their halved-spacing refinements. The raw values on the given
    grids stay available in ``residuals`` under ``*_grid`` keys; grid
    functions such as ground states should use those.
    """
    dg_grid = dg_grid or degennes_grid()
    mont_grid = mont_grid or montgomery_grid()
    dg = _degennes_bundle(dg_grid, tol)
    mo = _montgomery_bundle(mont_grid, tol)
    if extrapolate:
        dg_val = _richardson(dg, _degennes_bundle(dg_grid.refined(2), tol))
        mo_val = _richardson(mo, _montgomery_bundle(mont_grid.refined(2), tol))
    else:
        dg_val, mo_val = dg, mo
    xi0, theta0, fd, fit = dg_val
    rho0, nu0, mcurv = mo_val
    if abs(fd - fit) / 2 > 1e-4:
        raise ConvergenceError(f"curvature estimators disagree: {fd / 2:.8f} vs {fit / 2:.8f}")
    return SpectralConstants(
        theta0=float(theta0), xi0=float(xi0), delta0=float(0.5 * fd), nu0_hat=float(nu0),
        rho0=float(rho0), mu_pp=float(fd), montgomery_curvature=float(mcurv),
        degennes_grid=dg_grid, montgomery_grid=mont_grid,
        residuals={
            "degennes": degennes_mu(dg[0], dg_grid).residual,
            "montgomery": montgomery_mu(mo[0], mont_grid).residual,
            "curvature_fd_vs_fit": float(abs(fd - fit) / 2),
            "dmu_at_xi0_grid": degennes_dmu(dg[0], dg_grid),
            "xi0_grid": float(dg[0]),
            "theta0_grid": float(dg[1]),
            "rho0_grid": float(mo[0]),
            "nu0_hat_grid": float(mo[1]),
            "extrapolated": bool(extrapolate),
        },
    )


@lru_cache(maxsize=8)
def _cached(dg_L, dg_n, mo_L, mo_n):
    return compute_constants(degennes_grid(dg_L, dg_n), montgomery_grid(mo_L, mo_n))


def default_constants() -> SpectralConstants:
    """Constants on the default grids, computed once per process."""
    return _cached(DEGENNES_L, DEGENNES_N, MONTGOMERY_L, MONTGOMERY_N)
