"""Minimal reverse-mode autodiff over numpy arrays.

Tape style: every op returns a new Tensor whose ``_backward`` closure routes
the output gradient to the op's parents; ``Tensor.backward()`` runs the
closures in reverse topological order. Only the ops this model needs exist.
The LSTM runs as one fused op over a whole sequence (see kernels), which keeps
the tape short: one node per layer instead of one per gate per step.
"""

from __future__ import annotations

import numpy as np

from .. import kernels


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents", "name")

    def __init__(self, data, requires_grad=False, parents=(), backward=None, name=""):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        tag = self.name or "tensor"
        return f"<{tag} {self.data.shape} {self.data.dtype}>"

    def accumulate(self, g):
        self.grad = g if self.grad is None else self.grad + g

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() expects a scalar loss")
        topo, seen = [], set()

        def visit(node):
            if id(node) in seen:
                return
            seen.add(id(node))
            for p in node._parents:
                visit(p)
            topo.append(node)

        visit(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    def item(self) -> float:
        return float(self.data)


def _unbroadcast(g, shape):
    """Sum gradient over axes that numpy broadcasting expanded."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if like is not None else np.float64
    return Tensor(np.asarray(x, dtype=dtype))


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b, like=a)
    out = Tensor(a.data + b.data, parents=(a, b))

    def backward(g):
        a.accumulate(_unbroadcast(g, a.data.shape))
        b.accumulate(_unbroadcast(g, b.data.shape))

    out._backward = backward
    return out


def mul(a, b):
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    out = Tensor(a.data * b.data, parents=(a, b))

    def backward(g):
        a.accumulate(_unbroadcast(g * b.data, a.data.shape))
        b.accumulate(_unbroadcast(g * a.data, b.data.shape))

    out._backward = backward
    return out


def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul expects 2-D operands")
    out = Tensor(a.data @ b.data, parents=(a, b))

    def backward(g):
        a.accumulate(g @ b.data.T)
        b.accumulate(a.data.T @ g)

    out._backward = backward
    return out


def transpose(a):
    out = Tensor(a.data.T, parents=(a,))
    out._backward = lambda g: a.accumulate(g.T)
    return out


def tanh(a):
    y = np.tanh(a.data)
    out = Tensor(y, parents=(a,))
    out._backward = lambda g: a.accumulate(g * (1.0 - y * y))
    return out


def sigmoid(a):
    y = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(y, parents=(a,))
    out._backward = lambda g: a.accumulate(g * y * (1.0 - y))
    return out


def concat(parts, axis=0):
    parts = list(parts)
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis), parents=tuple(parts))
    sizes = [p.data.shape[axis] for p in parts]

    def backward(g):
        offset = 0
        for p, size in zip(parts, sizes):
            index = [slice(None)] * g.ndim
            index[axis] = slice(offset, offset + size)
            p.accumulate(g[tuple(index)])
            offset += size

    out._backward = backward
    return out


def rows(a, idx):
    """Gather rows (embedding lookup / state selection); duplicates allowed."""
    idx = np.asarray(idx, dtype=np.int64)
    out = Tensor(a.data[idx], parents=(a,))

    def backward(g):
        da = np.zeros_like(a.data)
        np.add.at(da, idx, g)
        a.accumulate(da)

    out._backward = backward
    return out


def slice_vec(a, start, stop):
    out = Tensor(a.data[..., start:stop], parents=(a,))

    def backward(g):
        da = np.zeros_like(a.data)
        da[..., start:stop] = g
        a.accumulate(da)

    out._backward = backward
    return out


def sum_all(a):
    out = Tensor(np.array(a.data.sum(), dtype=a.data.dtype), parents=(a,))
    out._backward = lambda g: a.accumulate(np.broadcast_to(g, a.data.shape).copy())
    return out


def softmax_rows(a):
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=1, keepdims=True)
    out = Tensor(y, parents=(a,))

    def backward(g):
        dot = (g * y).sum(axis=1, keepdims=True)
        a.accumulate(y * (g - dot))

    out._backward = backward
    return out


def dropout(a, rate, rng):
    """Inverted dropout; identity when rate == 0."""
    if rate <= 0.0:
        return a
    mask = (rng.random(a.data.shape) >= rate).astype(a.data.dtype) / (1.0 - rate)
    out = Tensor(a.data * mask, parents=(a,))
    out._backward = lambda g: a.accumulate(g * mask)
    return out


def weighted_nll(logits, targets, weights):
    """Sum over steps of weights[t] * -log softmax(logits)[t, targets[t]]."""
    targets = np.asarray(targets, dtype=np.int64)
    w = np.asarray(weights, dtype=logits.data.dtype)
    z = logits.data
    m = z.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(z - m).sum(axis=1))
    picked = z[np.arange(len(targets)), targets]
    per_step = lse - picked
    out = Tensor(np.array((w * per_step).sum(), dtype=z.dtype), parents=(logits,))

    def backward(g):
        soft = np.exp(z - m)
        soft /= soft.sum(axis=1, keepdims=True)
        soft[np.arange(len(targets)), targets] -= 1.0
        logits.accumulate(soft * (w * g)[:, None])

    out._backward = backward
    return out, per_step


def lstm_seq(X, W, b, h0=None, c0=None):
    """Fused LSTM over a (T, D) input; returns the (T, H) hidden sequence.

    h0/c0 are non-trainable initial states (zeros by default). The heavy
    lifting happens in the kernels module under the selected backend.
    """
    H = W.data.shape[1] // 4
    dtype = X.data.dtype
    h0 = np.zeros(H, dtype=dtype) if h0 is None else h0
    c0 = np.zeros(H, dtype=dtype) if c0 is None else c0
    H_out, C_out, gates = kernels.lstm_seq_forward(X.data, W.data, b.data, h0, c0)
    out = Tensor(H_out, parents=(X, W, b))

    def backward(g):
        dX, dW, db, _, _ = kernels.lstm_seq_backward(
            np.ascontiguousarray(g), X.data, W.data, gates, C_out, h0, c0
        )
        X.accumulate(dX)
        W.accumulate(dW)
        b.accumulate(db)

    out._backward = backward
    return out
