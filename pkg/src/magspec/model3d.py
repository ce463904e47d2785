"""Rescaled three-dimensional model operator on a truncated box.

In rescaled variables (``r, s`` of size ``h^(1/3)``, ``t`` of size ``h^(1/2)``)
the operator divided by ``h`` reads, with ``e = h^(1/6)`` and
``p = eta s + zeta r``,

    (e D_r - A_r)^2 + (e D_s - A_s)^2 + D_t^2,
    A_r =  sin(theta) t + e^2 cos(theta) t p,
    A_s = -cos(theta) t - e gamma r^2 / 2 + e^2 sin(theta) t p.

The magnetic terms are discretized with link phases ``exp(-i A dx / e)``
evaluated at edge midpoints. That keeps the matrix Hermitian and exactly
gauge covariant. ``t = 0`` is a Neumann wall (its node is an unknown with
half trapezoid weight); every other side is Dirichlet.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import kernels
from .eigencore import BC, ConvergenceError, Grid3D, smallest_eig_operator

DEFAULT_R = 10.0
DEFAULT_T = 10.0
DEFAULT_NR = 95          # interior nodes, i.e. 96 cells per side
DEFAULT_NT = 63          # plus the wall node: 64 t-unknowns, 64 cells
PARAM_BOUND = 5.0
DEFAULT_TOL = 1e-3
MAX_ITER = 6000


def default_box(R: float = DEFAULT_R, T: float = DEFAULT_T, nr: int = DEFAULT_NR,
                nt: int = DEFAULT_NT) -> Grid3D:
    return Grid3D.box([(-R, R), (-R, R), (0.0, T)], [nr, nr, nt],
                      [(BC.DIRICHLET, BC.DIRICHLET)] * 2 + [(BC.NEUMANN, BC.DIRICHLET)])


@dataclass(frozen=True)
class ModelParams:
    gamma: float
    theta: float
    h: float
    eta: float = 0.0
    zeta: float = 0.0
    box: Grid3D = field(default_factory=default_box)
    bound: float = PARAM_BOUND

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        for name in ("gamma", "eta", "zeta"):
            if abs(getattr(self, name)) > self.bound:
                raise ValueError(f"|{name}| exceeds the parameter bound {self.bound}")
        gr, gs, gt = self.box.axes
        if gt.bc_left != BC.NEUMANN or gt.bc_right != BC.DIRICHLET:
            raise ValueError("t-axis must be Neumann at 0 and Dirichlet at its far end")
        if gt.a != 0.0 or gt.b < 8.0:
            raise ValueError("t-axis must be [0, T] with T >= 8")
        for g in (gr, gs):
            if g.bc_left != BC.DIRICHLET or g.bc_right != BC.DIRICHLET or min(-g.a, g.b) < 8.0:
                raise ValueError("r and s axes must be Dirichlet and contain [-8, 8]")

    @property
    def eps(self) -> float:
        return self.h ** (1.0 / 6.0)

    @property
    def shape(self):
        return self.box.shape

    def describe(self) -> dict:
        return {"gamma": self.gamma, "theta": self.theta, "h": self.h, "eta": self.eta,
                "zeta": self.zeta, "box": [ax.describe() for ax in self.box.axes]}


@dataclass
class Stencil:
    """Link phases and coefficients of one discretized operator."""

    ur: np.ndarray
    us: np.ndarray
    cr: float
    cs: float
    ct: float
    tw: np.ndarray
    shape: tuple

    def apply(self, u, out=None):
        return kernels.peierls_apply(u, self.ur, self.us, self.cr, self.cs, self.ct, self.tw, out)


def _t_couplings(nt):
    tw = np.ones(nt - 1)
    tw[0] = np.sqrt(2.0)   # wall node carries half weight
    return tw


def _potentials(theta, gamma, eta, zeta, eps):
    s, c = np.sin(theta), np.cos(theta)
    e2 = eps * eps

    def a_r(r, ss, t):
        return s * t + e2 * c * t * (eta * ss + zeta * r)

    def a_s(r, ss, t):
        return -c * t - eps * gamma * r * r / 2.0 + e2 * s * t * (eta * ss + zeta * r)

    return a_r, a_s


def _links(a_r, a_s, r, s, t, dr, ds, planck):
    R, S, T = np.meshgrid(r + dr / 2.0, s, t, indexing="ij")
    ur = np.exp(-1j * a_r(R, S, T) * dr / planck)
    R, S, T = np.meshgrid(r, s + ds / 2.0, t, indexing="ij")
    us = np.exp(-1j * a_s(R, S, T) * ds / planck)
    return ur, us


def build_stencil(params: ModelParams) -> Stencil:
    gr, gs, gt = params.box.axes
    eps = params.eps
    a_r, a_s = _potentials(params.theta, params.gamma, params.eta, params.zeta, eps)
    ur, us = _links(a_r, a_s, gr.nodes, gs.nodes, gt.nodes, gr.spacing, gs.spacing, eps)
    return Stencil(ur=ur, us=us, cr=eps ** 2 / gr.spacing ** 2, cs=eps ** 2 / gs.spacing ** 2,
                   ct=1.0 / gt.spacing ** 2, tw=_t_couplings(gt.size), shape=params.shape)


def build_physical_stencil(params: ModelParams) -> Stencil:
    """Unscaled operator on the box mapped back to physical units.

    ``(h D_r - a_r)^2 + (h D_s - a_s)^2 + h^2 D_t^2`` with
    ``a_r = sin t + cos p t``, ``a_s = -cos t + sin p t - gamma r^2/2``.
    Its eigenvalues are ``h`` times those of :func:`build_stencil`.
    """
    h = params.h
    gr, gs, gt = params.box.axes
    lr, lt = h ** (1.0 / 3.0), h ** 0.5
    sn, cn = np.sin(params.theta), np.cos(params.theta)
    eta, zeta, gam = params.eta, params.zeta, params.gamma

    def a_r(r, s, t):
        return sn * t + cn * (eta * s + zeta * r) * t

    def a_s(r, s, t):
        return -cn * t + sn * (eta * s + zeta * r) * t - gam * r * r / 2.0

    dr, ds, dt = lr * gr.spacing, lr * gs.spacing, lt * gt.spacing
    ur, us = _links(a_r, a_s, lr * gr.nodes, lr * gs.nodes, lt * gt.nodes, dr, ds, h)
    return Stencil(ur=ur, us=us, cr=h * h / dr ** 2, cs=h * h / ds ** 2, ct=h * h / dt ** 2,
                   tw=_t_couplings(gt.size), shape=params.shape)


def apply_P1(u, params: ModelParams, stencil: Stencil = None):
    """Discrete rescaled operator applied to a complex grid function (sqrt-weight unknowns)."""
    u = np.asarray(u, dtype=complex)
    if u.shape != params.shape:
        raise ValueError(f"grid function has shape {u.shape}, box needs {params.shape}")
    stencil = stencil or build_stencil(params)
    return stencil.apply(np.ascontiguousarray(u))


# --------------------------------------------------------------------------
# factorized form, for the operator identity check
# --------------------------------------------------------------------------

def _central(u, dx, axis):
    """``-i d/dx`` by central differences with zero values outside the box."""
    pad = [(0, 0)] * u.ndim
    pad[axis] = (1, 1)
    up = np.pad(u, pad)
    n = u.shape[axis]
    hi = np.take(up, np.arange(2, n + 2), axis=axis)
    lo = np.take(up, np.arange(0, n), axis=axis)
    return -1j * (hi - lo) / (2.0 * dx)


def _t_second(u, dt):
    """``D_t^2`` on nodal values with a reflecting wall at t = 0."""
    up = np.concatenate([u[:, :, 1:2], u, np.zeros_like(u[:, :, :1])], axis=2)
    return -(up[:, :, 2:] - 2.0 * u + up[:, :, :-2]) / dt ** 2


def apply_factorized(u_nodal, params: ModelParams):
    """``D_t^2 + (t - e L1)^2 + e^2 (L2 - e p t)^2`` by central differences on nodal values."""
    gr, gs, gt = params.box.axes
    eps = params.eps
    sn, cn = np.sin(params.theta), np.cos(params.theta)
    R, S, T = np.meshgrid(gr.nodes, gs.nodes, gt.nodes, indexing="ij")
    quad = params.gamma * R * R / 2.0
    pt = (params.eta * S + params.zeta * R) * T

    def L1(w):
        return sn * _central(w, gr.spacing, 0) - cn * (quad * w + _central(w, gs.spacing, 1))

    def L2(w):
        return (cn * _central(w, gr.spacing, 0) + sn * (quad * w + _central(w, gs.spacing, 1))
                - eps * pt * w)

    def first(w):
        return T * w - eps * L1(w)

    u = np.asarray(u_nodal, dtype=complex)
    return _t_second(u, gt.spacing) + first(first(u)) + eps ** 2 * L2(L2(u))


def apply_expanded_nodal(u_nodal, params: ModelParams):
    """The link-phase operator acting on nodal values (no sqrt-weight scaling)."""
    gt = params.box.axes[2]
    sw = np.sqrt(gt.weights)[None, None, :]
    return apply_P1(u_nodal * sw, params) / sw


def smooth_bump_field(params: ModelParams, center=(0.2, -0.1, 1.0), width=(1.5, 1.5, 0.8),
                      wave=(0.3, -0.2), seed: int = 0):
    """Smooth test function, negligible on the artificial sides.

    The envelope sits where the ground state lives, near the wall, so the
    link phases per cell stay small.
    """
    rng = np.random.default_rng(seed)
    gr, gs, gt = params.box.axes
    R, S, T = np.meshgrid(gr.nodes, gs.nodes, gt.nodes, indexing="ij")
    env = np.exp(-((R - center[0]) / width[0]) ** 2 - ((S - center[1]) / width[1]) ** 2
                 - ((T - center[2]) / width[2]) ** 2)
    a = rng.normal(size=3)
    return env * np.exp(1j * (wave[0] * R + wave[1] * S)) * (1 + 0.3 * a[0] * R + 0.2j * a[1] * S
                                                            + 0.1 * a[2] * T)


def identity_gap(params: ModelParams, u_nodal=None, interior: float = 7.0) -> float:
    """Max-norm difference of the expanded and factorized forms on the inner box."""
    if u_nodal is None:
        u_nodal = smooth_bump_field(params)
    diff = apply_expanded_nodal(u_nodal, params) - apply_factorized(u_nodal, params)
    gr, gs, gt = params.box.axes
    mr = np.abs(gr.nodes) <= interior
    ms = np.abs(gs.nodes) <= interior
    return float(np.abs(diff[np.ix_(mr, ms, np.ones(gt.size, bool))]).max())


def refined_box(box: Grid3D, factor: int) -> Grid3D:
    return Grid3D(tuple(ax.refined(factor) if factor > 1 else ax for ax in box.axes))


def box_with_counts(nr: int, nt: int, R: float = DEFAULT_R, T: float = DEFAULT_T) -> Grid3D:
    return default_box(R=R, T=T, nr=nr, nt=nt)


# --------------------------------------------------------------------------
# eigenvalue
# --------------------------------------------------------------------------

@dataclass
class ModelEigen:
    params: ModelParams
    lam: float
    vector: np.ndarray
    residual: float
    iterations: int
    converged: bool

    @property
    def physical(self) -> float:
        """Eigenvalue of the unscaled model, ``h * lam``."""
        return self.params.h * self.lam


def model_lambda1(params: ModelParams, tol: float = DEFAULT_TOL, x0=None, max_iter: int = MAX_ITER,
                  raise_on_fail: bool = True, physical: bool = False) -> ModelEigen:
    """Lowest eigenvalue of the discrete rescaled operator.

    ``tol`` bounds the eigen-residual; the eigenvalue error is of order
    ``tol^2 / gap``. With ``physical`` the unscaled operator is solved instead
    and ``lam`` is divided by ``h`` on return.
    """
    st = build_physical_stencil(params) if physical else build_stencil(params)
    shape = params.shape
    n = int(np.prod(shape))
    buf = np.empty(shape, dtype=complex)

    def A(x):
        return st.apply(x.reshape(shape), buf).ravel().copy()

    scale = params.h if physical else 1.0
    res = smallest_eig_operator(A, n, tol * scale, max_iter, dtype=complex,
                                x0=None if x0 is None else np.asarray(x0).ravel(),
                                raise_on_fail=raise_on_fail)
    return ModelEigen(params=params, lam=res.value / scale, vector=res.vector.reshape(shape),
                      residual=res.residual / scale, iterations=res.iterations,
                      converged=res.converged)


def moment_decay(eigvec, box: Grid3D, n: int, h: float) -> float:
    """``int t^n |u|^2`` in physical t-units for a sqrt-weight eigenvector."""
    if not 0 <= int(n) <= 6:
        raise ValueError("moment order must lie in 0..6")
    u = np.asarray(eigvec).reshape(box.shape)
    t = box.axes[2].nodes
    p = np.sum(np.abs(u) ** 2, axis=(0, 1))
    return float(h ** (n / 2.0) * np.sum(t ** n * p) / np.sum(p))


def reflect(u):
    """``(r, s) -> (-r, -s)``; maps the (eta, zeta) problem to (-eta, -zeta) up to conjugation."""
    return np.asarray(u)[::-1, ::-1, :]


@dataclass
class SweepCell:
    h: float
    eta: float
    zeta: float
    value: float = float("nan")
    deviation: float = float("nan")
    residual: float = float("nan")
    iterations: int = 0
    status: str = "ok"


def _solve_cell(base: ModelParams, h, eta, zeta, tol, x0):
    p = replace(base, h=h, eta=eta, zeta=zeta)
    try:
        r = model_lambda1(p, tol, x0=x0)
        return SweepCell(h=h, eta=eta, zeta=zeta, value=r.physical, residual=r.residual,
                         iterations=r.iterations), r.vector
    except (ConvergenceError, ValueError, FloatingPointError) as exc:
        return SweepCell(h=h, eta=eta, zeta=zeta, status=f"failed: {exc}"), None


def eta_zeta_sweep(base: ModelParams, eta_list, zeta_list, h_list, tol: float = DEFAULT_TOL,
                   workers: int = 1, reference: Optional[dict] = None):
    """Physical eigenvalues ``h lam`` for every (eta, zeta) at every h, and the deviations.

    The ``(0, 0)`` reference is solved first at each h; the other cells start
    from its eigenvector and run on a bounded thread pool. A failed cell is
    reported in its status and the sweep carries on. Pass ``reference`` as
    ``{h: ModelEigen}`` to reuse earlier reference solves.
    """
    pairs = [(float(e), float(z)) for e in eta_list for z in zeta_list]
    for e, z in pairs:
        if max(abs(e), abs(z)) > base.bound:
            raise ValueError("eta or zeta outside the parameter bound")
    reference = dict(reference or {})
    cells = []
    for h in h_list:
        h = float(h)
        if h in reference:
            ref = reference[h]
            ref_cell = SweepCell(h=h, eta=0.0, zeta=0.0, value=ref.physical, residual=ref.residual,
                                 iterations=ref.iterations)
            x0 = ref.vector
        else:
            ref_cell, x0 = _solve_cell(base, h, 0.0, 0.0, tol, None)
        ref_cell.deviation = 0.0 if ref_cell.status == "ok" else float("nan")
        todo = [(e, z) for e, z in pairs if (e, z) != (0.0, 0.0)]
        with ThreadPoolExecutor(max_workers=max(1, int(workers))) as pool:
            futs = [pool.submit(_solve_cell, base, h, e, z, tol, x0) for e, z in todo]
            done = {pz: f.result()[0] for pz, f in zip(todo, futs)}
        for e, z in pairs:
            if (e, z) == (0.0, 0.0):
                cells.append(ref_cell)
                continue
            c = done[(e, z)]
            if c.status == "ok" and ref_cell.status == "ok":
                c.deviation = c.value - ref_cell.value
            elif c.status == "ok":
                c.status = "failed: reference cell failed"
            cells.append(c)
    return cells


def fit_two_term(h_list, values):
    """Least-squares ``a h + b h^(4/3)`` through physical eigenvalues."""
    h = np.asarray(h_list, dtype=float)
    A = np.column_stack([h, h ** (4.0 / 3.0)])
    (a, b), *_ = np.linalg.lstsq(A, np.asarray(values, dtype=float), rcond=None)
    return float(a), float(b)


def fit_power(h_list, values):
    """``C, exponent`` with ``|values| ~ C h^exponent`` by a log-log fit."""
    h = np.asarray(h_list, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    if np.any(v <= 0):
        raise ValueError("power fit needs nonzero values")
    slope, icpt = np.polyfit(np.log(h), np.log(v), 1)
    return float(np.exp(icpt)), float(slope)
