"""Grids and smallest-eigenpair solvers.

Two solvers live here. ``smallest_eig_tridiag`` does Sturm bisection plus
inverse iteration on a symmetric tridiagonal matrix. ``smallest_eig_operator``
is a block LOBPCG for matrix-free self-adjoint operators, real or complex
Hermitian.

Neumann ends use a node on the wall with half trapezoid weight. The discrete
eigenproblem ``K u = lam W u`` is symmetrized by the change of unknowns
``u_sym = sqrt(W) u``. Solvers only ever see the symmetric form, so use the
``to_nodal`` helpers to get nodal values back.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg

from . import kernels

DEFAULT_SEED = 20240521


class BC(str, Enum):
    NEUMANN = "neumann"
    DIRICHLET = "dirichlet"


class ConvergenceError(RuntimeError):
    """Raised when a solver misses its tolerance. ``result`` holds the best pair."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on [a, b] with ``n`` interior nodes.

    A Neumann end adds the wall node itself as an unknown, so the number of
    unknowns is ``n`` plus one per Neumann end.
    """

    a: float
    b: float
    n: int
    bc_left: BC = BC.DIRICHLET
    bc_right: BC = BC.DIRICHLET

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or self.a >= self.b:
            raise ValueError(f"need a < b, got [{self.a}, {self.b}]")
        if int(self.n) < 3:
            raise ValueError(f"need at least 3 interior nodes, got {self.n}")
        object.__setattr__(self, "bc_left", BC(self.bc_left))
        object.__setattr__(self, "bc_right", BC(self.bc_right))
        object.__setattr__(self, "n", int(self.n))

    @property
    def spacing(self) -> float:
        return (self.b - self.a) / (self.n + 1)

    @property
    def size(self) -> int:
        return self.n + (self.bc_left == BC.NEUMANN) + (self.bc_right == BC.NEUMANN)

    def _index_range(self):
        lo = 0 if self.bc_left == BC.NEUMANN else 1
        hi = self.n + 1 if self.bc_right == BC.NEUMANN else self.n
        return lo, hi

    @property
    def nodes(self) -> np.ndarray:
        lo, hi = self._index_range()
        return self.a + self.spacing * np.arange(lo, hi + 1)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights (in units of the spacing) of the unknowns."""
        w = np.ones(self.size)
        if self.bc_left == BC.NEUMANN:
            w[0] = 0.5
        if self.bc_right == BC.NEUMANN:
            w[-1] = 0.5
        return w

    def to_nodal(self, v: np.ndarray) -> np.ndarray:
        """Symmetric unknowns -> nodal values normalized in L2(a, b)."""
        u = np.asarray(v) / np.sqrt(self.weights)
        return u / np.sqrt(self.spacing)

    def from_nodal(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u) * np.sqrt(self.weights) * np.sqrt(self.spacing)

    def integrate(self, f: np.ndarray) -> float:
        return float(self.spacing * np.sum(self.weights * f))

    def refined(self, factor: int = 2) -> "Grid1D":
        return Grid1D(self.a, self.b, factor * (self.n + 1) - 1, self.bc_left, self.bc_right)

    def describe(self) -> dict:
        return {"a": self.a, "b": self.b, "n": self.n,
                "bc_left": self.bc_left.value, "bc_right": self.bc_right.value}


@dataclass(frozen=True)
class Grid3D:
    """Tensor grid; each axis is a Grid1D."""

    axes: tuple

    def __post_init__(self):
        if len(self.axes) != 3:
            raise ValueError("Grid3D needs exactly three axes")
        for ax in self.axes:
            if not isinstance(ax, Grid1D):
                raise TypeError("Grid3D axes must be Grid1D instances")

    @classmethod
    def box(cls, extents: Sequence, counts: Sequence, bcs: Sequence) -> "Grid3D":
        axes = tuple(Grid1D(lo, hi, n, bl, br)
                     for (lo, hi), n, (bl, br) in zip(extents, counts, bcs))
        return cls(axes)

    @property
    def shape(self) -> tuple:
        return tuple(ax.size for ax in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod([ax.spacing for ax in self.axes]))

    @property
    def weights(self) -> np.ndarray:
        w0, w1, w2 = (ax.weights for ax in self.axes)
        return w0[:, None, None] * w1[None, :, None] * w2[None, None, :]

    def to_nodal(self, v: np.ndarray) -> np.ndarray:
        u = np.asarray(v).reshape(self.shape) / np.sqrt(self.weights)
        return u / np.sqrt(self.cell_volume)

    def describe(self) -> dict:
        return {"axes": [ax.describe() for ax in self.axes]}


@dataclass
class EigenResult:
    value: float
    vector: np.ndarray
    residual: float
    iterations: int
    history: list = field(default_factory=list)
    converged: bool = True


def discretize_schrodinger_1d(grid: Grid1D, potential: Callable) -> tuple:
    """Symmetric tridiagonal form of ``-d^2/dx^2 + V`` in symmetric unknowns."""
    x = grid.nodes
    v = np.asarray(potential(x), dtype=float)
    if v.shape == ():
        v = np.full(x.shape, float(v))
    bad = ~np.isfinite(v)
    if bad.any():
        i = int(np.argmax(bad))
        raise ValueError(f"potential is not finite at node {i} (x={x[i]!r})")
    inv = 1.0 / grid.spacing ** 2
    diag = 2.0 * inv + v
    off = -inv * np.ones(grid.size - 1)
    # a half-weight wall node couples with sqrt(2) after symmetrization
    if grid.bc_left == BC.NEUMANN:
        off[0] *= np.sqrt(2.0)
    if grid.bc_right == BC.NEUMANN:
        off[-1] *= np.sqrt(2.0)
    return diag, off


def tridiag_matvec(diag, off, x):
    y = diag * x
    y[:-1] += off * x[1:]
    y[1:] += off * x[:-1]
    return y


def _gershgorin(diag, off):
    r = np.zeros_like(diag)
    r[:-1] += np.abs(off)
    r[1:] += np.abs(off)
    return float(np.min(diag - r)), float(np.max(diag + r))


def smallest_eig_tridiag(diag, offdiag, tol=1e-10, max_restarts=4, seed=DEFAULT_SEED) -> EigenResult:
    """Lowest eigenpair of a symmetric tridiagonal matrix.

    The eigenvalue is bracketed by Sturm bisection to width ``tol``; the vector
    comes from inverse iteration at the bracket midpoint. The returned value is
    the Rayleigh quotient, clipped to the bracket.
    """
    diag = np.ascontiguousarray(diag, dtype=float)
    off = np.ascontiguousarray(offdiag, dtype=float)
    n = diag.shape[0]
    if off.shape[0] != n - 1:
        raise ValueError("offdiag must have length len(diag) - 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if n == 1:
        return EigenResult(float(diag[0]), np.ones(1), 0.0, 0)
    off2 = off * off
    lo, hi = _gershgorin(diag, off)
    scale = max(abs(lo), abs(hi), 1.0)
    lo -= 1e-12 * scale
    hi += 1e-12 * scale
    # rounding noise in the Sturm recurrence sets a floor on useful widths
    width = max(tol, 4.0 * np.finfo(float).eps * scale)
    steps = 0
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if kernels.sturm_count(diag, off2, mid) >= 1:
            hi = mid
        else:
            lo = mid
        steps += 1
    shift = 0.5 * (lo + hi)

    rng = np.random.default_rng(seed)
    best = None
    for attempt in range(max_restarts + 1):
        x = np.ones(n) if attempt == 0 else rng.standard_normal(n)
        x /= np.linalg.norm(x)
        for _ in range(3):
            y = kernels.tridiag_solve(diag - shift, off, x)
            nrm = np.linalg.norm(y)
            if not np.isfinite(nrm) or nrm == 0.0:
                break
            x = y / nrm
        ax = tridiag_matvec(diag, off, x)
        lam = float(np.dot(x, ax))
        lam = min(max(lam, lo), hi)
        res = float(np.linalg.norm(ax - lam * x))
        if best is None or res < best.residual:
            best = EigenResult(lam, x, res, steps + attempt + 1)
        if res <= tol:
            break
    if best.residual > tol:
        best.converged = False
        raise ConvergenceError(
            f"inverse iteration residual {best.residual:.3e} exceeds tol {tol:.3e}", best)
    # sign convention: first entry of largest magnitude block positive
    k = int(np.argmax(np.abs(best.vector) > 1e-3 * np.abs(best.vector).max()))
    if best.vector[k] < 0:
        best.vector = -best.vector
    return best


# --------------------------------------------------------------------------
# LOBPCG
# --------------------------------------------------------------------------
#
# Blocks are stored one vector per row so every vector is contiguous. The
# Rayleigh-Ritz step works on small Gram matrices of the trial basis
# [X, W, P]; the long vectors are touched by one Gram product and one
# recombination per iteration.

def _apply_rows(apply, X):
    out = np.empty_like(X)
    for c in range(X.shape[0]):
        out[c] = apply(X[c])
    return out


def _rayleigh_ritz(G, H, m, drop):
    """Lowest m Ritz pairs of the pencil (H, G), dropping dependent directions.

    Returns coefficients C (k x m) and Ritz values.
    """
    G = 0.5 * (G + G.conj().T)
    H = 0.5 * (H + H.conj().T)
    d = np.sqrt(np.maximum(np.real(np.diag(G)), 1e-300))
    Gn = G / np.outer(d, d)
    w, V = linalg.eigh(Gn)
    keep = w > drop * w.max()
    B = (V[:, keep] / np.sqrt(w[keep])) / d[:, None]
    Hr = B.conj().T @ H @ B
    lam, U = linalg.eigh(0.5 * (Hr + Hr.conj().T))
    return B @ U[:, :m], lam[:m]


def smallest_eig_operator(apply: Callable, dim: int, tol: float = 1e-8, max_iter: int = 2000,
                          *, block: int = 1, precond: Optional[Callable] = None,
                          dtype=float, x0: Optional[np.ndarray] = None,
                          seed: int = DEFAULT_SEED, raise_on_fail: bool = True,
                          callback: Optional[Callable] = None) -> EigenResult:
    """Lowest eigenpair of a self-adjoint operator by block LOBPCG.

    ``apply`` maps a 1D vector to a 1D vector. ``precond`` should approximate
    the inverse of a positive definite shift of the operator. Extra block
    rows only speed things up. Convergence is judged on the lowest pair:
    ``||A u - lam u|| <= tol`` with ``||u|| = 1``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    dim = int(dim)
    block = max(1, min(block, dim))
    rng = np.random.default_rng(seed)
    cplx = np.dtype(dtype).kind == "c"
    X = rng.standard_normal((block, dim))
    if cplx:
        X = X + 1j * rng.standard_normal((block, dim))
    X = X.astype(dtype)
    if x0 is not None:
        X[0] = np.asarray(x0, dtype=dtype).ravel()

    if dim <= 3 * block + 2:
        # tiny problems: build the dense matrix and be done
        A = _apply_rows(apply, np.eye(dim, dtype=dtype)).T
        A = 0.5 * (A + A.conj().T)
        w, V = linalg.eigh(A)
        u = V[:, 0]
        res = float(np.linalg.norm(A @ u - w[0] * u))
        return EigenResult(float(w[0]), u, res, 1, [float(w[0])])

    AX = _apply_rows(apply, X)
    C, lam = _rayleigh_ritz(X.conj() @ X.T, X.conj() @ AX.T, block, 1e-12)
    X, AX = C.T @ X, C.T @ AX
    m = X.shape[0]
    P = AP = None
    history = [float(lam[0])]
    res = np.inf
    drop = 1e-10
    restarts = 0
    for it in range(1, max_iter + 1):
        R = AX - lam[:, None] * X
        res = float(np.linalg.norm(R[0]) / np.linalg.norm(X[0]))
        if callback is not None:
            callback(it - 1, float(lam[0]), res)
        if res <= tol:
            # AX is carried by recurrences; confirm against a fresh product
            x = X[0] / np.linalg.norm(X[0])
            ax = apply(x)
            lam0 = float(np.real(np.vdot(x, ax)))
            res = float(np.linalg.norm(ax - lam0 * x))
            if res <= tol:
                return EigenResult(lam0, x, res, it - 1, history)
            AX = _apply_rows(apply, X)
            continue
        W = R if precond is None else _apply_rows(precond, R)
        W /= np.linalg.norm(W, axis=1)[:, None]
        AW = _apply_rows(apply, W)
        if P is None:
            S, AS = np.vstack([X, W]), np.vstack([AX, AW])
        else:
            nP = np.linalg.norm(P, axis=1)[:, None]
            S, AS = np.vstack([X, W, P / nP]), np.vstack([AX, AW, AP / nP])
        Sc = S.conj()
        G, H = Sc @ S.T, Sc @ AS.T
        C, lam_new = _rayleigh_ritz(G, H, m, drop)
        if lam_new[0] > lam[0] + 1e-10 * max(abs(lam[0]), 1.0) and P is not None:
            # Gram matrix went ill conditioned; restart without P
            P = AP = None
            restarts += 1
            continue
        lam = lam_new
        Cp = C.copy()
        Cp[:m] = 0.0
        coef = np.hstack([C, Cp]).T
        XS, AXS = coef @ S, coef @ AS
        X, P, AX, AP = XS[:m], XS[m:], AXS[:m], AXS[m:]
        # keep X at unit norm so tolerances stay meaningful
        nX = np.linalg.norm(X, axis=1)[:, None]
        X, AX = X / nX, AX / nX
        history.append(float(lam[0]))
    result = EigenResult(float(lam[0]), X[0] / np.linalg.norm(X[0]), res, max_iter, history,
                         converged=False)
    if raise_on_fail:
        raise ConvergenceError(f"LOBPCG stopped after {max_iter} iterations, residual {res:.3e}",
                               result)
    return result
