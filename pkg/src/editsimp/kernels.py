"""Hot numeric kernels with two interchangeable backends.

Every kernel is written once as a plain-numpy function and, when the numba
backend is active, compiled with ``@njit``. The backend is chosen at import
time from the ``EDITSIMP_BACKEND`` environment variable:

    EDITSIMP_BACKEND=numba   force numba (error if unavailable)
    EDITSIMP_BACKEND=numpy   force the pure-numpy fallback
    unset                    numba if importable, else numpy

Both backends compute identical values (same operation order); tests assert
parity. ``benchmarks/bench_kernels.py`` times one against the other.
"""

from __future__ import annotations

import os

import numpy as np

_requested = os.environ.get("EDITSIMP_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ValueError(f"EDITSIMP_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numpy":
    _njit = None
else:
    try:
        from numba import njit as _njit
    except ImportError:
        if _requested == "numba":
            raise
        _njit = None

BACKEND = "numba" if _njit is not None else "numpy"


def _compile(fn):
    if _njit is None:
        return fn
    return _njit(cache=True)(fn)


def set_num_threads(n: int):
    """Honour the thread-count env var when the numba backend is active."""
    if BACKEND == "numba":
        import numba

        numba.set_num_threads(max(1, n))


# ---------------------------------------------------------------------------
# Shortest-edit-path table (insert/delete only, unit costs).
# dist[i, j] = edit distance between x[i:] and y[j:].
# ---------------------------------------------------------------------------

def _edit_dp_table(x, y):
    n = x.shape[0]
    m = y.shape[0]
    dist = np.empty((n + 1, m + 1), dtype=np.int64)
    for j in range(m + 1):
        dist[n, j] = m - j
    for i in range(n - 1, -1, -1):
        dist[i, m] = n - i
        for j in range(m - 1, -1, -1):
            if x[i] == y[j]:
                dist[i, j] = dist[i + 1, j + 1]
            else:
                a = dist[i, j + 1]
                b = dist[i + 1, j]
                dist[i, j] = (a if a < b else b) + 1
    return dist


edit_dp_table = _compile(_edit_dp_table)


# ---------------------------------------------------------------------------
# LSTM over a whole sequence. Gate layout along the last axis: i, f, g, o.
# W stacks input rows on top of hidden rows: z_t = [x_t, h_{t-1}] @ W + b.
# Forward caches post-activation gates and cell states for the backward pass.
# ---------------------------------------------------------------------------

def _lstm_seq_forward_fill(X, W, b, h0, c0, H_out, C_out, gates):
    T = X.shape[0]
    D = X.shape[1]
    H = h0.shape[0]
    one = np.float32(1.0)  # float32 scalar keeps float32 inputs float32, promotes cleanly to float64
    h = h0.copy()
    c = c0.copy()
    for t in range(T):
        z = X[t] @ W[:D] + h @ W[D:] + b
        i = one / (one + np.exp(-z[:H]))
        f = one / (one + np.exp(-z[H : 2 * H]))
        g = np.tanh(z[2 * H : 3 * H])
        o = one / (one + np.exp(-z[3 * H :]))
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[t, :H] = i
        gates[t, H : 2 * H] = f
        gates[t, 2 * H : 3 * H] = g
        gates[t, 3 * H :] = o
        C_out[t] = c
        H_out[t] = h


def _lstm_seq_backward_fill(dH_out, X, W, gates, C_out, h0, c0, dX, dW, db):
    T = X.shape[0]
    D = X.shape[1]
    H = h0.shape[0]
    one = np.float32(1.0)
    dh_next = np.zeros_like(h0)
    dc_next = np.zeros_like(c0)
    for t in range(T - 1, -1, -1):
        i = gates[t, :H]
        f = gates[t, H : 2 * H]
        g = gates[t, 2 * H : 3 * H]
        o = gates[t, 3 * H :]
        c_prev = C_out[t - 1] if t > 0 else c0
        tanh_c = np.tanh(C_out[t])
        dh = dH_out[t] + dh_next
        do = dh * tanh_c
        dc = dh * o * (one - tanh_c * tanh_c) + dc_next
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dz = np.zeros_like(db)
        dz[:H] = di * i * (one - i)
        dz[H : 2 * H] = df * f * (one - f)
        dz[2 * H : 3 * H] = dg * (one - g * g)
        dz[3 * H :] = do * o * (one - o)
        dX[t] = dz @ W[:D].T
        dh_next = dz @ W[D:].T
        dc_next = dc * f
        if t > 0:
            h_prev = gates[t - 1, 3 * H :] * np.tanh(C_out[t - 1])
        else:
            h_prev = h0
        dW[:D] += np.outer(X[t], dz)
        dW[D:] += np.outer(h_prev, dz)
        db += dz
    return dh_next, dc_next


_forward_fill = _compile(_lstm_seq_forward_fill)
_backward_fill = _compile(_lstm_seq_backward_fill)


def lstm_seq_forward(X, W, b, h0, c0):
    T, H = X.shape[0], h0.shape[0]
    H_out = np.empty((T, H), dtype=X.dtype)
    C_out = np.empty((T, H), dtype=X.dtype)
    gates = np.empty((T, 4 * H), dtype=X.dtype)
    _forward_fill(X, W, b, h0, c0, H_out, C_out, gates)
    return H_out, C_out, gates


def lstm_seq_backward(dH_out, X, W, gates, C_out, h0, c0):
    dX = np.zeros_like(X)
    dW = np.zeros_like(W)
    db = np.zeros(W.shape[1], dtype=W.dtype)
    dh0, dc0 = _backward_fill(dH_out, X, W, gates, C_out, h0, c0, dX, dW, db)
    return dX, dW, db, dh0, dc0


# plain-python versions kept importable for parity tests
def _lstm_seq_forward(X, W, b, h0, c0):
    T, H = X.shape[0], h0.shape[0]
    H_out = np.empty((T, H), dtype=X.dtype)
    C_out = np.empty((T, H), dtype=X.dtype)
    gates = np.empty((T, 4 * H), dtype=X.dtype)
    _lstm_seq_forward_fill(X, W, b, h0, c0, H_out, C_out, gates)
    return H_out, C_out, gates


def _lstm_seq_backward(dH_out, X, W, gates, C_out, h0, c0):
    dX = np.zeros_like(X)
    dW = np.zeros_like(W)
    db = np.zeros(W.shape[1], dtype=W.dtype)
    dh0, dc0 = _lstm_seq_backward_fill(dH_out, X, W, gates, C_out, h0, c0, dX, dW, db)
    return dX, dW, db, dh0, dc0
