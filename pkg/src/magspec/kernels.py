"""Hot loops: Sturm counts, tridiagonal solves and the 3D magnetic stencil.

Each kernel exists twice: a numba ``@njit`` version and a pure-numpy version.
Set ``MAGSPEC_NO_NUMBA=1`` before import to force the numpy path. Both paths
compute the same thing up to floating-point reassociation.
"""

import os

import numpy as np

_FLAG = os.environ.get("MAGSPEC_NO_NUMBA", "").strip().lower()
_DISABLED = _FLAG in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"

# smallest pivot magnitude allowed in the Sturm recurrence
_PIVMIN = 1e-300


# --------------------------------------------------------------------------
# Sturm count
# --------------------------------------------------------------------------

def _sturm_count_py(diag, off2, x):
    n = diag.shape[0]
    count = 0
    q = diag[0] - x
    if q < 0.0:
        count += 1
    for i in range(1, n):
        if abs(q) < _PIVMIN:
            q = -_PIVMIN
        q = diag[i] - x - off2[i - 1] / q
        if q < 0.0:
            count += 1
    return count


def _sturm_count_np(diag, off2, xs):
    """Vectorized over shifts: counts for every entry of ``xs`` in one sweep."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    q = diag[0] - xs
    count = (q < 0.0).astype(np.int64)
    for i in range(1, diag.shape[0]):
        q = np.where(np.abs(q) < _PIVMIN, -_PIVMIN, q)
        q = diag[i] - xs - off2[i - 1] / q
        count += q < 0.0
    return count


def sturm_count(diag, off2, x):
    """Number of eigenvalues below ``x`` of the tridiagonal matrix.

    ``off2`` holds the squared off-diagonal entries.
    """
    if HAVE_NUMBA:
        return int(_sturm_count_nb(diag, off2, float(x)))
    return int(_sturm_count_np(diag, off2, x)[0])


def sturm_counts(diag, off2, xs):
    """Counts for several shifts at once."""
    if HAVE_NUMBA:
        return np.array([_sturm_count_nb(diag, off2, float(x)) for x in xs])
    return _sturm_count_np(diag, off2, xs)


# --------------------------------------------------------------------------
# Tridiagonal solve (Thomas algorithm)
# --------------------------------------------------------------------------

def _tridiag_solve_py(diag, off, rhs, out):
    # LU without pivoting; tiny pivots are nudged so
    # that inverse iteration with a near-exact shift stays finite
    n = diag.shape[0]
    cp = np.empty(n)
    dp = np.empty_like(rhs)
    piv = diag[0]
    if abs(piv) < 1e-300:
        piv = 1e-300
    cp[0] = off[0] / piv if n > 1 else 0.0
    dp[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - off[i - 1] * cp[i - 1]
        if abs(piv) < 1e-300:
            piv = 1e-300
        if i < n - 1:
            cp[i] = off[i] / piv
        dp[i] = (rhs[i] - off[i - 1] * dp[i - 1]) / piv
    out[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]
    return out


def tridiag_solve(diag, off, rhs):
    """Solve ``T x = rhs`` for symmetric tridiagonal ``T`` (real or complex rhs)."""
    diag = np.ascontiguousarray(diag, dtype=float)
    off = np.ascontiguousarray(off, dtype=float)
    rhs = np.ascontiguousarray(rhs)
    out = np.empty_like(rhs)
    if HAVE_NUMBA:
        _tridiag_solve_nb(diag, off, rhs, out)
        return out
    from scipy.linalg import solve_banded

    ab = np.zeros((3, diag.shape[0]))
    ab[0, 1:] = off
    ab[1] = diag
    ab[2, :-1] = off
    try:
        return solve_banded((1, 1), ab, rhs, check_finite=False)
    except np.linalg.LinAlgError:
        return _tridiag_solve_py(diag, off, rhs, out)


# --------------------------------------------------------------------------
# 3D magnetic stencil with Peierls link phases
# --------------------------------------------------------------------------
#
# Layout: u[i, j, k] with i along r, j along s, k along t. Links are
#   ur[i, j, k]  between (i, j, k) and (i+1, j, k)
#   us[i, j, k]  between (i, j, k) and (i, j+1, k)
# t is real: node k=0 sits on the Neumann wall with half trapezoid weight,
# and the unknowns are scaled by sqrt(weight). The k=0 <-> k=1 coupling
# therefore carries a factor sqrt(2).

def _peierls_apply_py(u, ur, us, cr, cs, ct, tw, out):
    nr, ns, nt = u.shape
    diag = 2.0 * cr + 2.0 * cs + 2.0 * ct
    out[...] = diag * u
    out[:-1] -= cr * ur[:-1] * u[1:]
    out[1:] -= cr * np.conj(ur[:-1]) * u[:-1]
    out[:, :-1] -= cs * us[:, :-1] * u[:, 1:]
    out[:, 1:] -= cs * np.conj(us[:, :-1]) * u[:, :-1]
    out[:, :, :-1] -= ct * tw[None, None, :] * u[:, :, 1:]
    out[:, :, 1:] -= ct * tw[None, None, :] * u[:, :, :-1]
    return out


def peierls_apply(u, ur, us, cr, cs, ct, tw, out=None):
    """Apply the scaled 3D magnetic operator to a complex grid function.

    ``tw[k]`` is the t-coupling factor between planes k and k+1 (length nt-1).
    """
    if out is None:
        out = np.empty_like(u)
    if HAVE_NUMBA:
        _peierls_apply_nb(u, ur, us, float(cr), float(cs), float(ct), tw, out)
        return out
    return _peierls_apply_py(u, ur, us, cr, cs, ct, tw, out)


def _tline_solve_py(rhs, ct, tw, shift, out):
    """Batched solve of (K_t + shift) x = rhs along the last axis."""
    nt = rhs.shape[-1]
    d = np.full(nt, 2.0 * ct + shift)
    e = -ct * tw
    from scipy.linalg import solve_banded

    ab = np.zeros((3, nt))
    ab[0, 1:] = e
    ab[1] = d
    ab[2, :-1] = e
    flat = rhs.reshape(-1, nt).T
    out.reshape(-1, nt)[...] = solve_banded((1, 1), ab, flat, check_finite=False).T
    return out


def tline_solve(rhs, ct, tw, shift, out=None):
    """Preconditioner kernel: invert the t-part plus a constant shift."""
    if out is None:
        out = np.empty_like(rhs)
    if HAVE_NUMBA:
        _tline_solve_nb(rhs, float(ct), tw, float(shift), out)
        return out
    return _tline_solve_py(rhs, ct, tw, shift, out)


if HAVE_NUMBA:
    _sturm_count_nb = njit(cache=True, nogil=True)(_sturm_count_py)
    _tridiag_solve_nb = njit(cache=True, nogil=True)(_tridiag_solve_py)

    @njit(cache=True, nogil=True)
    def _peierls_apply_nb(u, ur, us, cr, cs, ct, tw, out):
        nr, ns, nt = u.shape
        diag = 2.0 * cr + 2.0 * cs + 2.0 * ct
        for i in range(nr):
            for j in range(ns):
                for k in range(nt):
                    v = diag * u[i, j, k]
                    if i + 1 < nr:
                        v -= cr * ur[i, j, k] * u[i + 1, j, k]
                    if i > 0:
                        v -= cr * np.conj(ur[i - 1, j, k]) * u[i - 1, j, k]
                    if j + 1 < ns:
                        v -= cs * us[i, j, k] * u[i, j + 1, k]
                    if j > 0:
                        v -= cs * np.conj(us[i, j - 1, k]) * u[i, j - 1, k]
                    if k + 1 < nt:
                        v -= ct * tw[k] * u[i, j, k + 1]
                    if k > 0:
                        v -= ct * tw[k - 1] * u[i, j, k - 1]
                    out[i, j, k] = v

    @njit(cache=True, nogil=True)
    def _tline_solve_nb(rhs, ct, tw, shift, out):
        nr, ns, nt = rhs.shape
        d0 = 2.0 * ct + shift
        cp = np.empty(nt)
        piv = np.empty(nt)
        # factorization is shared by every line
        piv[0] = d0
        cp[0] = -ct * tw[0] / d0
        for k in range(1, nt):
            e = -ct * tw[k - 1]
            piv[k] = d0 - e * cp[k - 1]
            if k < nt - 1:
                cp[k] = -ct * tw[k] / piv[k]
        dp = np.empty(nt, dtype=rhs.dtype)
        for i in range(nr):
            for j in range(ns):
                dp[0] = rhs[i, j, 0] / piv[0]
                for k in range(1, nt):
                    dp[k] = (rhs[i, j, k] + ct * tw[k - 1] * dp[k - 1]) / piv[k]
                out[i, j, nt - 1] = dp[nt - 1]
                for k in range(nt - 2, -1, -1):
                    out[i, j, k] = dp[k] - cp[k] * out[i, j, k + 1]
