"""Magnetic geometry on the unit ball and on parameterized closed surfaces.

The helical field ``B(x) = -(cos(tau x3), sin(tau x3), 0)`` has unit length
everywhere. On the unit sphere its tangency curve ``Gamma = {B.N = 0}`` is
the zero set of ``x1 cos(tau x3) + x2 sin(tau x3)``. Four charts cover it:
two graphs over ``x3`` (c1, c2) and two graphs over a polar parameter
``rho`` (c3 near the north pole, c4 near the south pole).

Conventions used throughout:

* ``N`` is the inward unit normal, ``N(x) = -x`` on the ball.
* ``Gamma`` is oriented so that ``B.T >= 0``; ``V = T x N``.
* ``kappa_g = -(d^2 gamma/ds^2).V`` and ``kappa_n = (d^2 gamma/ds^2).N``.
* Adapted coordinates ``x(r, s, t) = (1 - t)(cos r gamma(s) + sin r e(s))``
  where ``e = +-V`` is the in-surface unit normal to Gamma pointing along the
  component of ``B`` transverse to Gamma. Then the field components in these
  coordinates start as ``(cos theta, sin theta, 0)`` with
  ``theta = arcsin(B.T)`` and ``t`` points into the ball.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

BRANCHES = ("c1", "c2", "c3", "c4")

# orientation multiplier per chart making the traversal continuous around
# Gamma with B.T >= 0 (c1 runs north to south, joins c2 at the south pole)
_ORIENT = {"c1": -1.0, "c2": 1.0, "c3": 1.0, "c4": -1.0}

UNIT_TOL = 1e-12
DEFAULT_STEP = 1e-3
MIN_STEP = 1e-6
FD_AGREE = 1e-6


class GeometryError(ValueError):
    """Raised for parameters at chart endpoints or failed finite differences."""


# --------------------------------------------------------------------------
# Fields
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HelicalField:
    """Unit-length field rotating with height: ``B = -(cos tau x3, sin tau x3, 0)``."""

    tau: float

    def __post_init__(self):
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise ValueError(f"tau must be positive, got {self.tau}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        z = self.tau * x[..., 2]
        return np.stack([-np.cos(z), -np.sin(z), np.zeros_like(z)], axis=-1)

    def potential(self, x):
        """Vector potential ``(cos tau x3, sin tau x3, 0)/tau`` with curl equal to the field."""
        x = np.asarray(x, dtype=float)
        z = self.tau * x[..., 2]
        return np.stack([np.cos(z), np.sin(z), np.zeros_like(z)], axis=-1) / self.tau

    def check_unit(self, points, tol: float = UNIT_TOL) -> float:
        dev = np.max(np.abs(np.linalg.norm(self(points), axis=-1) - 1.0))
        if dev > tol:
            raise GeometryError(f"|B| deviates from 1 by {dev:.3e}")
        return float(dev)


@dataclass(frozen=True)
class ConstantField:
    direction: tuple = (0.0, 0.0, 1.0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        b = np.asarray(self.direction, dtype=float)
        b = b / np.linalg.norm(b)
        return np.broadcast_to(b, x.shape).copy()


# --------------------------------------------------------------------------
# Helical charts and closed forms
# --------------------------------------------------------------------------

def _check_param(p):
    p = float(p)
    if not (-1.0 < p < 1.0):
        raise GeometryError(f"chart parameter {p} outside (-1, 1)")
    return p


def _check_branch(branch):
    if branch not in BRANCHES:
        raise GeometryError(f"unknown branch {branch!r}; expected one of {BRANCHES}")
    return branch


def gamma_branch(branch: str, param: float, tau: float) -> np.ndarray:
    """Point of the helical tangency curve on the given chart."""
    _check_branch(branch)
    p = _check_param(param)
    if branch in ("c1", "c2"):
        q = np.sqrt(1.0 - p * p)
        sn, cs = np.sin(tau * p), np.cos(tau * p)
        if branch == "c1":
            return np.array([q * sn, -q * cs, p])
        return np.array([-q * sn, q * cs, p])
    w = np.sqrt(1.0 - p * p)
    sn, cs = np.sin(tau * w), np.cos(tau * w)
    if branch == "c3":
        return np.array([p * sn, -p * cs, w])
    return np.array([-p * sn, -p * cs, -w])


def gamma_branch_derivative(branch: str, param: float, tau: float) -> np.ndarray:
    """Exact derivative of the chart with respect to its parameter."""
    _check_branch(branch)
    p = _check_param(param)
    if branch in ("c1", "c2"):
        q = np.sqrt(1.0 - p * p)
        dq = -p / q
        sn, cs = np.sin(tau * p), np.cos(tau * p)
        d = np.array([dq * sn + tau * q * cs, -dq * cs + tau * q * sn, 1.0])
        if branch == "c2":
            d[:2] *= -1.0
        return d
    w = np.sqrt(1.0 - p * p)
    dw = -p / w
    sn, cs = np.sin(tau * w), np.cos(tau * w)
    if branch == "c3":
        return np.array([sn + p * tau * dw * cs, -cs + p * tau * dw * sn, dw])
    return np.array([-sn - p * tau * dw * cs, -cs + p * tau * dw * sn, -dw])


def arc_speed(x3: float, tau: float) -> float:
    """``ds/dx3`` along the x3-charts; diverges at the poles."""
    x3 = float(x3)
    if x3 * x3 >= 1.0:
        raise GeometryError(f"arc speed diverges at x3 = {x3}")
    u = 1.0 - x3 * x3
    return float(np.sqrt((1.0 + tau * tau * u * u) / u))


def b_dot_t(x3: float, tau: float) -> float:
    """Closed-form ``B.T`` on the oriented helical Gamma."""
    u = 1.0 - float(x3) ** 2
    return float(tau * u / np.sqrt(1.0 + tau * tau * u * u))


def kappa_nB(x3: float, tau: float) -> float:
    """Closed-form magnetic curvature on the helical Gamma."""
    u = 1.0 - float(x3) ** 2
    return float(np.sqrt(1.0 + tau * tau * u * u))


# --------------------------------------------------------------------------
# Curves on the ball
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BallCurve:
    """A parameterized arc of a curve on the unit sphere with a fixed orientation."""

    position: Callable
    derivative: Callable
    orientation: float = 1.0
    domain: tuple = (-1.0, 1.0)
    label: str = ""

    def check(self, p):
        lo, hi = self.domain
        if not (lo < p < hi):
            raise GeometryError(f"parameter {p} outside curve domain {self.domain}")
        return float(p)

    def speed(self, p) -> float:
        return float(np.linalg.norm(self.derivative(p)))

    def tangent(self, p) -> np.ndarray:
        d = self.orientation * np.asarray(self.derivative(p), dtype=float)
        return d / np.linalg.norm(d)


def helical_curve(branch: str, tau: float) -> BallCurve:
    _check_branch(branch)
    return BallCurve(position=lambda p: gamma_branch(branch, p, tau),
                     derivative=lambda p: gamma_branch_derivative(branch, p, tau),
                     orientation=_ORIENT[branch], label=branch)


def equator_curve() -> BallCurve:
    """The equator ``x3 = 0`` traversed counterclockwise seen from above."""
    return BallCurve(position=lambda p: np.array([np.cos(p), np.sin(p), 0.0]),
                     derivative=lambda p: np.array([-np.sin(p), np.cos(p), 0.0]),
                     orientation=1.0, domain=(-np.inf, np.inf), label="equator")


def _fit_step(curve, p, step, reach=2):
    """Largest step <= ``step`` keeping ``p +- reach*2*step`` inside the domain."""
    lo, hi = curve.domain
    k = step
    while k >= MIN_STEP:
        if lo < p - 2 * reach * k and p + 2 * reach * k < hi:
            return k
        k *= 0.5
    raise GeometryError(f"finite-difference step underflow at parameter {p} "
                        f"(chart endpoint too close)")


def _five_point(f, p, k):
    return (f(p - 2 * k) - 8 * f(p - k) + 8 * f(p + k) - f(p + 2 * k)) / (12 * k)


def paired_derivative(f: Callable, p: float, k: float, agree: float = FD_AGREE):
    """Five-point derivative at steps ``k`` and ``2k``; returns (value, gap).

    Raises if the two estimates disagree by more than ``agree`` (absolute,
    measured after Richardson weighting).
    """
    d1 = np.asarray(_five_point(f, p, k))
    d2 = np.asarray(_five_point(f, p, 2 * k))
    gap = float(np.max(np.abs(d1 - d2))) / 15.0
    if not np.isfinite(gap) or gap > agree:
        raise GeometryError(f"paired finite differences disagree by {gap:.3e} at {p}")
    return (16.0 * d1 - d2) / 15.0, gap


def curve_frame(curve: BallCurve, p: float):
    p = curve.check(p)
    x = np.asarray(curve.position(p), dtype=float)
    T = curve.tangent(p)
    N = -x / np.linalg.norm(x)
    V = np.cross(T, N)
    return T, V, N


def curve_acceleration(curve: BallCurve, p: float, step: float = DEFAULT_STEP):
    """Second arc-length derivative of the curve and its FD gap estimate."""
    p = curve.check(p)
    k = _fit_step(curve, p, step)
    dT, gap = paired_derivative(curve.tangent, p, k)
    # arc length runs against the parameter on reversed charts: ds = orientation * speed * dp
    ds_dp = curve.orientation * curve.speed(p)
    return dT / ds_dp, gap / abs(ds_dp)


@dataclass
class Curvatures:
    kappa_g: float
    kappa_n: float
    acceleration: np.ndarray
    fd_gap: float


def curve_curvatures(curve: BallCurve, p: float, step: float = DEFAULT_STEP) -> Curvatures:
    acc, gap = curve_acceleration(curve, p, step)
    T, V, N = curve_frame(curve, p)
    return Curvatures(kappa_g=float(-acc @ V), kappa_n=float(acc @ N),
                      acceleration=acc, fd_gap=gap)


def frame_at(param: float, branch: str, tau: float):
    """``(T, V, N)`` at a chart point of the helical Gamma."""
    return curve_frame(helical_curve(branch, tau), _check_param(param))


def geodesic_curvature(param: float, branch: str, tau: float, step: float = DEFAULT_STEP) -> float:
    return curve_curvatures(helical_curve(branch, tau), _check_param(param), step).kappa_g


# --------------------------------------------------------------------------
# Magnetic curvature by tangential differentiation on the ball
# --------------------------------------------------------------------------

def _great_circle(x, direction, eps):
    return np.cos(eps) * x + np.sin(eps) * direction


def ball_normal_slope(field: Callable, x, direction, step: float = DEFAULT_STEP) -> float:
    """Derivative of ``B.N`` along the great circle through ``x`` with unit tangent ``direction``."""
    x = np.asarray(x, dtype=float)

    def f(eps):
        y = _great_circle(x, direction, eps)
        return float(field(y) @ (-y))

    val, _ = paired_derivative(f, 0.0, step)
    return float(val)


def ball_kappa_nB(field: Callable, x, T, V, step: float = DEFAULT_STEP) -> float:
    """Magnitude of the tangential gradient of ``B.N`` at ``x``."""
    return float(np.hypot(ball_normal_slope(field, x, T, step), ball_normal_slope(field, x, V, step)))


# --------------------------------------------------------------------------
# Normal-form parameters
# --------------------------------------------------------------------------

@dataclass
class NormalForm:
    theta: float
    gammas: np.ndarray     # r-derivatives of the field components at r=0
    deltas: np.ndarray     # s-derivatives along Gamma
    kappa_metric: float    # curvature entering the metric 1 - 2 kappa r of the chosen r-direction
    kappa_check: float
    zeta: float
    identity_r: float      # residual of the unit-length identity differentiated in r
    identity_s: float      # same along Gamma
    direction_sign: float  # e = direction_sign * V


def _transverse_sign(curve, p, field):
    T, V, N = curve_frame(curve, p)
    bv = float(field(curve.position(p)) @ V)
    if abs(bv) > 1e-12:
        return np.sign(bv)
    # tangency point: inherit from a neighbour so that e(s) stays continuous
    lo, hi = curve.domain
    q = p + 1e-3 if p + 1e-3 < hi else p - 1e-3
    T2, V2, _ = curve_frame(curve, q)
    bv = float(field(curve.position(q)) @ V2)
    return np.sign(bv) if bv != 0 else 1.0


def curve_normal_form(curve: BallCurve, p: float, field: Callable,
                      step: float = DEFAULT_STEP) -> NormalForm:
    """Field components in adapted coordinates and their first derivatives at a Gamma point."""
    p = curve.check(p)
    x0 = np.asarray(curve.position(p), dtype=float)
    T, V, N = curve_frame(curve, p)
    B0 = field(x0)
    bt = float(np.clip(B0 @ T, -1.0, 1.0))
    if abs(B0 @ N) > 1e-8:
        raise GeometryError(f"point is not on Gamma: B.N = {B0 @ N:.3e}")
    theta = float(np.arcsin(bt))
    sign = _transverse_sign(curve, p, field)
    k = _fit_step(curve, p, step)
    ds_dp = curve.orientation * curve.speed(p)

    def e_of(q):
        return sign * curve_frame(curve, q)[1]

    e0 = e_of(p)
    de_dp, _ = paired_derivative(e_of, p, k)
    de_ds = de_dp / ds_dp

    def components_r(r):
        pr = np.cos(r) * x0 + np.sin(r) * e0
        J = np.column_stack([-np.sin(r) * x0 + np.cos(r) * e0,
                             np.cos(r) * T + np.sin(r) * de_ds,
                             -pr])
        return np.linalg.solve(J, field(pr))

    def components_s(q):
        xq = np.asarray(curve.position(q), dtype=float)
        Tq, Vq, Nq = curve_frame(curve, q)
        Bq = field(xq)
        return np.array([Bq @ (sign * Vq), Bq @ Tq, Bq @ Nq])

    gammas, _ = paired_derivative(components_r, 0.0, step)
    deltas_p, _ = paired_derivative(components_s, p, k)
    deltas = deltas_p / ds_dp
    acc, _ = curve_acceleration(curve, p, step)
    kappa_m = float(acc @ e0)

    sn, cs = np.sin(theta), np.cos(theta)
    kappa_check = -deltas[0] * sn + deltas[1] * cs
    zeta = -gammas[0] * sn + (gammas[1] - kappa_m * sn) * cs
    return NormalForm(theta=theta, gammas=np.asarray(gammas), deltas=np.asarray(deltas),
                      kappa_metric=kappa_m, kappa_check=float(kappa_check), zeta=float(zeta),
                      identity_r=float(gammas[0] * cs + gammas[1] * sn - kappa_m * sn * sn),
                      identity_s=float(deltas[0] * cs + deltas[1] * sn),
                      direction_sign=float(sign))


@dataclass
class GammaPoint:
    position: np.ndarray
    x3: float
    branch: str
    param: float
    T: np.ndarray
    V: np.ndarray
    N: np.ndarray
    kappa_nB: float
    b_dot_t: float
    kappa_g: float
    kappa_check: Optional[float] = None
    zeta: Optional[float] = None
    normal_form: Optional[NormalForm] = None


def gamma_point(param: float, branch: str, tau: float, with_normal_form: bool = True) -> GammaPoint:
    """Everything known about one chart point of the helical Gamma."""
    curve = helical_curve(branch, tau)
    p = _check_param(param)
    x = gamma_branch(branch, p, tau)
    T, V, N = curve_frame(curve, p)
    field = HelicalField(tau)
    pt = GammaPoint(position=x, x3=float(x[2]), branch=branch, param=p, T=T, V=V, N=N,
                    kappa_nB=kappa_nB(x[2], tau), b_dot_t=float(field(x) @ T),
                    kappa_g=curve_curvatures(curve, p).kappa_g)
    if with_normal_form:
        nf = curve_normal_form(curve, p, field)
        pt.normal_form = nf
        pt.kappa_check, pt.zeta = nf.kappa_check, nf.zeta
    return pt


def normal_form_params(point: GammaPoint, tau: float):
    """``(kappa_check, zeta)`` at a helical Gamma point."""
    nf = curve_normal_form(helical_curve(point.branch, tau), point.param, HelicalField(tau))
    return nf.kappa_check, nf.zeta


def chart_for_x3(x3: float, sheet: int = 1, pole_switch: float = 0.9):
    """Pick (branch, parameter) for a point of Gamma at height ``x3``.

    ``sheet`` selects c1 (``+1``) or c2 (``-1``). Above ``pole_switch`` in
    ``|x3|`` the polar charts are used since the x3-charts degenerate there.
    """
    x3 = float(x3)
    if abs(x3) < pole_switch:
        return ("c1" if sheet > 0 else "c2"), x3
    rho = np.sqrt(max(1.0 - x3 * x3, 0.0)) * (1.0 if sheet > 0 else -1.0)
    return ("c3" if x3 > 0 else "c4"), float(rho)


# --------------------------------------------------------------------------
# Generic extraction of Gamma on parameterized surfaces
# --------------------------------------------------------------------------

@dataclass
class SurfaceField:
    """A closed surface around the origin given by a chart on a parameter rectangle."""

    chart: Callable                   # (u, v) -> 3-vector, vectorized
    field: Callable                   # x -> B(x)
    u_range: tuple
    v_range: tuple
    periodic_v: bool = True
    unit_tol: float = 1e-8

    def normal(self, u, v, step: float = 1e-6):
        """Unit inward normal from the cross product of chart partials."""
        xu = (self.chart(u + step, v) - self.chart(u - step, v)) / (2 * step)
        xv = (self.chart(u, v + step) - self.chart(u, v - step)) / (2 * step)
        n = np.cross(xu, xv)
        norm = np.linalg.norm(n, axis=-1, keepdims=True)
        if np.any(norm < 1e-12):
            raise GeometryError("chart is not immersive at a sampled point")
        n = n / norm
        # inward means pointing toward the origin
        flip = np.sign(np.sum(n * self.chart(u, v), axis=-1, keepdims=True))
        return -flip * n

    def bn(self, u, v):
        x = self.chart(u, v)
        return np.sum(self.field(x) * self.normal(u, v), axis=-1)


def spheroid_surface(field: Callable, axes=(1.0, 1.0, 1.0), pole_axis: int = 2,
                     analytic_normal: bool = True) -> SurfaceField:
    """Ellipsoid chart with coordinate poles on the chosen axis.

    The exact inward normal ``-grad(sum x_i^2/a_i^2)`` normalized is used
    when ``analytic_normal`` holds; chart poles must avoid Gamma.
    """
    a = np.asarray(axes, dtype=float)
    others = [i for i in range(3) if i != pole_axis]

    def chart(u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        out = np.empty(np.broadcast(u, v).shape + (3,))
        out[..., pole_axis] = a[pole_axis] * np.cos(u)
        out[..., others[0]] = a[others[0]] * np.sin(u) * np.cos(v)
        out[..., others[1]] = a[others[1]] * np.sin(u) * np.sin(v)
        return out

    sf = SurfaceField(chart=chart, field=field, u_range=(0.0, np.pi), v_range=(0.0, 2 * np.pi))
    if analytic_normal:
        def normal(u, v, step=None):
            x = chart(u, v)
            g = -x / a ** 2
            return g / np.linalg.norm(g, axis=-1, keepdims=True)
        object.__setattr__(sf, "normal", normal)
    return sf


def _surface_gradient(sf: SurfaceField, u, v, step=1e-4):
    """Tangential gradient of ``B.N`` as a 3-vector, from chart partials and the metric."""
    def fu(q):
        return float(sf.bn(q, v))

    def fv(q):
        return float(sf.bn(u, q))

    du, _ = paired_derivative(fu, u, step, agree=1e-5)
    dv, _ = paired_derivative(fv, v, step, agree=1e-5)
    xu, _ = paired_derivative(lambda q: sf.chart(q, v), u, step, agree=1e-5)
    xv, _ = paired_derivative(lambda q: sf.chart(u, q), v, step, agree=1e-5)
    g = np.array([[xu @ xu, xu @ xv], [xu @ xv, xv @ xv]])
    coef = np.linalg.solve(g, np.array([du, dv]))
    return coef[0] * xu + coef[1] * xv


@dataclass
class GammaExtraction:
    points: np.ndarray                 # all polished samples, ordered curve by curve
    curves: list                       # list of (n_i, 3) arrays, each a closed polyline
    params: list                       # matching (n_i, 2) arrays of chart parameters
    bn_max: float
    kappa_nB: np.ndarray
    b_dot_t: np.ndarray
    c1_holds: bool
    kappa_nB_min: float
    bt_sign_changes: int
    tangency_points: np.ndarray
    mesh: float
    diagnostic: str = ""


def _polish_on_edge(sf, pa, pb):
    def g(s):
        q = pa + s * (pb - pa)
        return float(sf.bn(q[0], q[1]))
    s = brentq(g, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return pa + s * (pb - pa)


def _marching_segments(sf, U, Vv, F):
    """Crossings on grid edges and the segments joining them inside each cell."""
    nu, nv = F.shape
    ncell_v = nv if sf.periodic_v else nv - 1
    crossings = {}

    def edge_point(a, b):
        key = (a, b) if a < b else (b, a)
        if key in crossings:
            return key
        (i0, j0), (i1, j1) = key
        fa = F[i0, j0 % nv]
        if fa == 0.0:
            pt = np.array([U[i0], Vv[j0]])
        else:
            pa = np.array([U[i0], Vv[j0 % nv] if j0 < nv else Vv[j0 % nv] + (sf.v_range[1] - sf.v_range[0])])
            pb = np.array([U[i1], Vv[j1 % nv] if j1 < nv else Vv[j1 % nv] + (sf.v_range[1] - sf.v_range[0])])
            pt = _polish_on_edge(sf, pa, pb)
        crossings[key] = pt
        return key

    def val(node):
        i, j = node
        return F[i, j % nv]

    segments = []
    for i in range(nu - 1):
        for j in range(ncell_v):
            corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
            hits = []
            for c in range(4):
                a, b = corners[c], corners[(c + 1) % 4]
                if (val(a) < 0.0) != (val(b) < 0.0):
                    hits.append(edge_point(a, b))
            if len(hits) == 2:
                segments.append((hits[0], hits[1]))
            elif len(hits) == 4:
                # saddle cell: pair according to the sign at the cell centre
                centre = np.mean([val(c) for c in corners])
                if (centre < 0.0) == (val(corners[0]) < 0.0):
                    segments.append((hits[0], hits[1]))
                    segments.append((hits[2], hits[3]))
                else:
                    segments.append((hits[0], hits[3]))
                    segments.append((hits[1], hits[2]))
    return crossings, segments


def _canonical(key, nv):
    (i0, j0), (i1, j1) = key
    a, b = (i0, j0 % nv), (i1, j1 % nv)
    return (a, b) if a < b else (b, a)


def _chain(segments, nv):
    adj = {}
    for a, b in segments:
        a, b = _canonical(a, nv), _canonical(b, nv)
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    seen = set()
    chains = []
    for start in sorted(adj):
        if start in seen:
            continue
        chain = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            nxt = [n for n in adj[cur] if n != prev and n not in seen]
            if not nxt:
                break
            prev, cur = cur, nxt[0]
            chain.append(cur)
            seen.add(cur)
        chains.append(chain)
    return chains


def _tangency_along(bt, pts, mesh):
    """Isolated zeros of B.T along a closed polyline: sign changes and touching minima."""
    n = len(bt)
    found = []
    a = np.abs(bt)
    for i in range(n):
        prev, nxt = a[i - 1], a[(i + 1) % n]
        if a[i] <= prev and a[i] < nxt and a[i] < 10.0 * mesh:
            found.append(i)
        elif np.sign(bt[i]) != np.sign(bt[(i + 1) % n]) and bt[i] != 0:
            # a sign change already counts through the smaller neighbour
            j = i if a[i] <= a[(i + 1) % n] else (i + 1) % n
            if j not in found:
                found.append(j)
    # refine each by a parabola through the three neighbouring samples
    refined = []
    for i in sorted(set(found)):
        p0, p1, p2 = pts[i - 1], pts[i], pts[(i + 1) % n]
        y0, y1, y2 = a[i - 1], a[i], a[(i + 1) % n]
        denom = y0 - 2 * y1 + y2
        s = 0.5 * (y0 - y2) / denom if denom > 0 else 0.0
        s = float(np.clip(s, -1.0, 1.0))
        q = p1 + s * ((p2 - p0) / 2.0) + 0.5 * s * s * (p2 - 2 * p1 + p0)
        refined.append(q)
    return refined


def extract_gamma(sf: SurfaceField, resolution: int = 200, c1_floor: float = 1e-3) -> GammaExtraction:
    """Zero set of ``B.N`` on a parameterized surface.

    The parameter rectangle is sampled on a ``resolution x 2*resolution``
    grid. Sign changes on grid edges are polished with a bracketing root
    finder, so every returned point satisfies ``|B.N| <= 1e-10``.
    """
    nu = int(resolution)
    nv = 2 * nu
    du = (sf.u_range[1] - sf.u_range[0]) / nu
    U = sf.u_range[0] + du * (np.arange(nu) + 0.5)
    Vv = sf.v_range[0] + (sf.v_range[1] - sf.v_range[0]) * np.arange(nv) / nv
    UU, VV = np.meshgrid(U, Vv, indexing="ij")
    X = sf.chart(UU, VV)
    bmag = np.linalg.norm(sf.field(X), axis=-1)
    if np.max(np.abs(bmag - 1.0)) > sf.unit_tol:
        raise GeometryError("field is not of unit length on the surface samples")
    F = sf.bn(UU, VV)
    crossings, segments = _marching_segments(sf, U, Vv, F)
    dv = (sf.v_range[1] - sf.v_range[0]) / nv
    scale = np.max(np.linalg.norm(X, axis=-1))
    mesh = float(scale * max(du, dv))
    if not segments:
        return GammaExtraction(points=np.zeros((0, 3)), curves=[], params=[], bn_max=0.0,
                               kappa_nB=np.zeros(0), b_dot_t=np.zeros(0), c1_holds=False,
                               kappa_nB_min=0.0, bt_sign_changes=0,
                               tangency_points=np.zeros((0, 3)), mesh=mesh,
                               diagnostic="no zero crossing of B.N on the parameter grid")
    canon = {}
    for key, pt in crossings.items():
        canon[_canonical(key, nv)] = pt
    chains = _chain(segments, nv)
    curves, params, kn_all, bt_all = [], [], [], []
    tangencies = []
    sign_changes = 0
    bn_max = 0.0
    for chain in chains:
        uv = np.array([canon[k] for k in chain])
        pts = sf.chart(uv[:, 0], uv[:, 1])
        bn_max = max(bn_max, float(np.max(np.abs(sf.bn(uv[:, 0], uv[:, 1])))))
        kn = np.empty(len(uv))
        bt = np.empty(len(uv))
        for m, (u, v) in enumerate(uv):
            grad = _surface_gradient(sf, u, v)
            kn[m] = np.linalg.norm(grad)
            nrm = sf.normal(u, v)
            T = np.cross(nrm, grad) / kn[m]
            bt[m] = float(sf.field(pts[m]) @ T)
        nz = np.sign(bt[np.abs(bt) > 1e-12])
        sign_changes += int(np.sum(nz != np.roll(nz, 1))) if len(nz) > 1 else 0
        tangencies.extend(_tangency_along(bt, pts, mesh))
        curves.append(pts)
        params.append(uv)
        kn_all.append(kn)
        bt_all.append(bt)
    kn_cat = np.concatenate(kn_all)
    return GammaExtraction(points=np.concatenate(curves), curves=curves, params=params,
                           bn_max=bn_max, kappa_nB=kn_cat, b_dot_t=np.concatenate(bt_all),
                           c1_holds=bool(np.min(kn_cat) > c1_floor),
                           kappa_nB_min=float(np.min(kn_cat)), bt_sign_changes=sign_changes,
                           tangency_points=np.array(tangencies).reshape(-1, 3), mesh=mesh)


def distance_to_helical_gamma(x, tau: float) -> float:
    """Distance from ``x`` to the nearest helical Gamma point at the same height."""
    x = np.asarray(x, dtype=float)
    x3 = float(np.clip(x[2], -1.0 + 1e-15, 1.0 - 1e-15))
    best = np.inf
    for branch in ("c1", "c2"):
        best = min(best, np.linalg.norm(gamma_branch(branch, x3, tau) - x))
    return float(best)
