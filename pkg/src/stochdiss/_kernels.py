"""Hot simulation loops: numba-compiled with a pure-numpy fallback.

The time recursion cannot be vectorized across steps, so the per-step
loops live here.  The jitted kernels use explicit scalar loops (tiny
matrix products would otherwise dispatch to BLAS on every step); the
numpy fallback vectorizes across Monte-Carlo runs instead.  Set
``STOCHDISS_DISABLE_NUMBA=1`` to force the numpy path; it is also used
automatically when numba is unavailable or the state is empty.  Delay
draws always happen outside the kernels so both paths consume identical
inputs.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("STOCHDISS_DISABLE_NUMBA", "") not in ("", "0")

try:  # pragma: no cover - exercised indirectly via backend selection
    if _DISABLE:
        raise ImportError("numba disabled by STOCHDISS_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return wrap


def backend_name() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# open-loop recursion: x(k+1) = A x(k) + B u(k - w_k), y(k) = C x(k) + D u(k - w_k)

def _sim_numpy(A, B, C, D, u, w, x0):
    T = u.shape[0] - 1
    n, p = A.shape[0], C.shape[0]
    x = np.zeros((T + 1, n))
    y = np.zeros((T + 1, p))
    x[0] = x0
    zero_u = np.zeros(u.shape[1])
    for k in range(T + 1):
        j = k - int(w[k])
        ud = u[j] if j >= 0 else zero_u
        y[k] = C @ x[k] + D @ ud
        if k < T:
            x[k + 1] = A @ x[k] + B @ ud
    return x, y


@njit(cache=True)
def _sim_numba(A, B, C, D, u, w, x0):  # pragma: no cover - jitted
    T = u.shape[0] - 1
    n = A.shape[0]
    p = C.shape[0]
    m = u.shape[1]
    x = np.zeros((T + 1, n))
    y = np.zeros((T + 1, p))
    for i in range(n):
        x[0, i] = x0[i]
    zero_u = np.zeros(m)
    for k in range(T + 1):
        j = k - int(w[k])
        ud = u[j] if j >= 0 else zero_u
        for i in range(p):
            acc = 0.0
            for l in range(n):
                acc += C[i, l] * x[k, l]
            for l in range(m):
                acc += D[i, l] * ud[l]
            y[k, i] = acc
        if k < T:
            for i in range(n):
                acc = 0.0
                for l in range(n):
                    acc += A[i, l] * x[k, l]
                for l in range(m):
                    acc += B[i, l] * ud[l]
                x[k + 1, i] = acc
    return x, y


def sim_recursion(A, B, C, D, u, w, x0):
    if HAVE_NUMBA and A.shape[0] > 0:
        return _sim_numba(A, B, C, D, u, w, x0)
    return _sim_numpy(A, B, C, D, u, w, x0)


# ---------------------------------------------------------------------------
# Monte-Carlo running supply sums over a bank of delay realizations

def _mc_numpy(A, B, C, D, Q, S, R, u, W):
    runs, steps = W.shape
    T = steps - 1
    n = A.shape[0]
    X = np.zeros((runs, n))
    running = np.zeros((runs, steps))
    acc = np.zeros(runs)
    for k in range(steps):
        j = k - W[:, k]
        ud = np.where(j[:, None] >= 0, u[np.clip(j, 0, T)], 0.0)
        y = X @ C.T + ud @ D.T
        uk = np.broadcast_to(u[k], (runs, u.shape[1]))
        s = (np.einsum("ri,ij,rj->r", y, Q, y)
             + 2.0 * np.einsum("ri,ij,rj->r", y, S, uk)
             + np.einsum("ri,ij,rj->r", uk, R, uk))
        acc = acc + s
        running[:, k] = acc
        if k < T:
            X = X @ A.T + ud @ B.T
    return running


@njit(cache=True)
def _mc_numba(A, B, C, D, Q, S, R, u, W):  # pragma: no cover - jitted
    runs, steps = W.shape
    T = steps - 1
    n = A.shape[0]
    p = C.shape[0]
    m = u.shape[1]
    running = np.zeros((runs, steps))
    x = np.zeros(n)
    xn = np.zeros(n)
    y = np.zeros(p)
    zero_u = np.zeros(m)
    for r in range(runs):
        for i in range(n):
            x[i] = 0.0
        acc = 0.0
        for k in range(steps):
            j = k - int(W[r, k])
            ud = u[j] if j >= 0 else zero_u
            for i in range(p):
                yi = 0.0
                for l in range(n):
                    yi += C[i, l] * x[l]
                for l in range(m):
                    yi += D[i, l] * ud[l]
                y[i] = yi
            s = 0.0
            for i in range(p):
                for l in range(p):
                    s += y[i] * Q[i, l] * y[l]
            for i in range(p):
                for l in range(m):
                    s += 2.0 * y[i] * S[i, l] * u[k, l]
            for i in range(m):
                for l in range(m):
                    s += u[k, i] * R[i, l] * u[k, l]
            acc += s
            running[r, k] = acc
            if k < T:
                for i in range(n):
                    xi = 0.0
                    for l in range(n):
                        xi += A[i, l] * x[l]
                    for l in range(m):
                        xi += B[i, l] * ud[l]
                    xn[i] = xi
                for i in range(n):
                    x[i] = xn[i]
    return running


def mc_running_supply(A, B, C, D, Q, S, R, u, W):
    if HAVE_NUMBA and A.shape[0] > 0:
        return _mc_numba(A, B, C, D, Q, S, R, u, W)
    return _mc_numpy(A, B, C, D, Q, S, R, u, W)


# ---------------------------------------------------------------------------
# closed loop under static output feedback:
#   y_c(k) = K (y(k) + d(k)),  u(k) = d(k) - y_c(k)

def _cl_numpy(A, B, C, K, d, w, T):
    n = A.shape[0]
    x = np.zeros((T + 1, n))
    y = np.zeros(T + 1)
    u = np.zeros(T + 1)
    yc = np.zeros(T + 1)
    for k in range(T + 1):
        y[k] = C[0] @ x[k]
        yc[k] = K * (y[k] + d[k])
        u[k] = d[k] - yc[k]
        if k < T:
            j = k - int(w[k])
            ud = u[j] if j >= 0 else 0.0
            x[k + 1] = A @ x[k] + B[:, 0] * ud
    return x, y, u, yc


@njit(cache=True)
def _cl_numba(A, B, C, K, d, w, T):  # pragma: no cover - jitted
    n = A.shape[0]
    x = np.zeros((T + 1, n))
    y = np.zeros(T + 1)
    u = np.zeros(T + 1)
    yc = np.zeros(T + 1)
    for k in range(T + 1):
        acc = 0.0
        for i in range(n):
            acc += C[0, i] * x[k, i]
        y[k] = acc
        yc[k] = K * (y[k] + d[k])
        u[k] = d[k] - yc[k]
        if k < T:
            j = k - int(w[k])
            ud = u[j] if j >= 0 else 0.0
            for i in range(n):
                xi = 0.0
                for l in range(n):
                    xi += A[i, l] * x[k, l]
                x[k + 1, i] = xi + B[i, 0] * ud
    return x, y, u, yc


def closed_loop_recursion(A, B, C, K, d, w, T):
    if HAVE_NUMBA and A.shape[0] > 0:
        return _cl_numba(A, B, C, float(K), d, w, T)
    return _cl_numpy(A, B, C, float(K), d, w, T)
