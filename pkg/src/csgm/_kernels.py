"""Hot numeric loops, with a numba path and a pure-numpy path.

The active path is chosen once at import time from the ``CSGM_BACKEND``
environment variable:

* ``numba`` (or unset / ``auto``): compile the loops with ``numba.njit``;
  silently falls back to numpy when numba is not importable, unless the
  variable explicitly asked for numba.
* ``numpy``: never import numba.

Both paths are always importable through :func:`get_kernels` so that tests
and the benchmark can compare them side by side.
"""

from __future__ import annotations

import math
import os
from types import SimpleNamespace

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

LOG_2PI = math.log(2.0 * math.pi)


# --------------------------------------------------------------------------
# numpy path
# --------------------------------------------------------------------------


def _np_component_log_density(X, mean, chol):
    d = X.shape[1]
    sol = solve_triangular(chol, (X - mean).T, lower=True, check_finite=False)
    maha = np.einsum("ij,ij->j", sol, sol)
    log_det = 2.0 * np.log(np.diag(chol)).sum()
    return -0.5 * (d * LOG_2PI + log_det + maha)


def _np_weighted_log_density(X, means, chols, log_weights):
    out = np.empty((X.shape[0], means.shape[0]))
    for k in range(means.shape[0]):
        out[:, k] = _np_component_log_density(X, means[k], chols[k]) + log_weights[k]
    return out


def _np_log_normalize_rows(log_prob):
    log_norm = logsumexp(log_prob, axis=1)
    resp = np.exp(log_prob - log_norm[:, None])
    return resp, log_norm


def _np_nearest_neighbours(P):
    # Squared distances accumulated feature by feature (same order as the
    # compiled loop) so that exact ties resolve identically on both paths.
    n, d = P.shape
    dist = np.zeros((n, n))
    for j in range(d):
        diff = P[:, j][:, None] - P[None, :, j]
        dist += diff * diff
    np.fill_diagonal(dist, np.inf)
    return np.argmin(dist, axis=1)


# --------------------------------------------------------------------------
# numba path
# --------------------------------------------------------------------------


def _build_numba():
    from numba import njit

    @njit(cache=True)
    def component_log_density(X, mean, chol):
        # Forward substitution for all rows at once on a (d, n) buffer, so the
        # innermost loop is a contiguous axpy the compiler can vectorize.
        n, d = X.shape
        log_det = 0.0
        for i in range(d):
            log_det += math.log(chol[i, i])
        const = d * LOG_2PI + 2.0 * log_det
        Z = np.empty((d, n))
        for r in range(n):
            for i in range(d):
                Z[i, r] = X[r, i] - mean[i]
        maha = np.zeros(n)
        for i in range(d):
            zi = Z[i]
            for j in range(i):
                lij = chol[i, j]
                zj = Z[j]
                for r in range(n):
                    zi[r] -= lij * zj[r]
            inv = 1.0 / chol[i, i]
            for r in range(n):
                zi[r] *= inv
                maha[r] += zi[r] * zi[r]
        return -0.5 * (const + maha)

    @njit(cache=True)
    def weighted_log_density(X, means, chols, log_weights):
        n = X.shape[0]
        k_total = means.shape[0]
        out = np.empty((n, k_total))
        for k in range(k_total):
            col = component_log_density(X, means[k], chols[k])
            for r in range(n):
                out[r, k] = col[r] + log_weights[k]
        return out

    @njit(cache=True)
    def log_normalize_rows(log_prob):
        n, k_total = log_prob.shape
        resp = np.empty((n, k_total))
        log_norm = np.empty(n)
        for r in range(n):
            top = -np.inf
            for k in range(k_total):
                if log_prob[r, k] > top:
                    top = log_prob[r, k]
            if top == -np.inf:
                log_norm[r] = -np.inf
                for k in range(k_total):
                    resp[r, k] = np.nan
                continue
            acc = 0.0
            for k in range(k_total):
                acc += math.exp(log_prob[r, k] - top)
            log_norm[r] = top + math.log(acc)
            for k in range(k_total):
                resp[r, k] = math.exp(log_prob[r, k] - log_norm[r])
        return resp, log_norm

    @njit(cache=True)
    def nearest_neighbours(P):
        n, d = P.shape
        out = np.empty(n, dtype=np.int64)
        for a in range(n):
            best = np.inf
            best_idx = -1
            for b in range(n):
                if b == a:
                    continue
                acc = 0.0
                for j in range(d):
                    diff = P[a, j] - P[b, j]
                    acc += diff * diff
                if acc < best:
                    best = acc
                    best_idx = b
            out[a] = best_idx
        return out

    return SimpleNamespace(
        name="numba",
        component_log_density=component_log_density,
        weighted_log_density=weighted_log_density,
        log_normalize_rows=log_normalize_rows,
        nearest_neighbours=nearest_neighbours,
    )


_NUMPY = SimpleNamespace(
    name="numpy",
    component_log_density=_np_component_log_density,
    weighted_log_density=_np_weighted_log_density,
    log_normalize_rows=_np_log_normalize_rows,
    nearest_neighbours=_np_nearest_neighbours,
)

_NUMBA = None


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def get_kernels(name: str) -> SimpleNamespace:
    """Return the kernel namespace for ``"numba"`` or ``"numpy"``."""
    global _NUMBA
    if name == "numpy":
        return _NUMPY
    if name == "numba":
        if _NUMBA is None:
            _NUMBA = _build_numba()
        return _NUMBA
    raise ValueError(f"unknown backend {name!r}; expected 'numba' or 'numpy'")


def _select_backend() -> str:
    requested = os.environ.get("CSGM_BACKEND", "auto").strip().lower()
    if requested in ("", "auto"):
        return "numba" if numba_available() else "numpy"
    if requested in ("numba", "numpy"):
        return requested
    raise ValueError(f"CSGM_BACKEND must be 'numba', 'numpy' or 'auto', got {requested!r}")


BACKEND = _select_backend()
kernels = get_kernels(BACKEND)
