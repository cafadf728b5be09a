"""Reverse-mode autodiff over dense float64 arrays, plus the Adam optimizer.

The graph is define-by-run: each operation returns a new :class:`Tensor`
holding its numpy value, its parent tensors, and a closure that routes the
output gradient back to those parents.  ``backward`` topologically sorts the
graph below a scalar loss and accumulates gradients into ``Tensor.grad``.
Graphs are rebuilt on every forward pass; nothing is cached between steps.

Everything is float64 and deterministic: identical inputs reproduce forward
values bit-for-bit on one platform.
"""

from __future__ import annotations

import collections

import numpy as np

NORM_EPS = 1e-12

# Counts degenerate events handled by a defined fallback instead of a crash
# (currently only normalization of an all-zero vector).
diagnostics = collections.Counter()


class Tensor:
    """A float64 array node in the computation graph."""

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def T(self):
        return transpose(self)

    def item(self) -> float:
        return float(self.data)

    def backward(self):
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

    # arithmetic sugar; scalars and ndarrays are wrapped as constant nodes
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(_wrap(other), -1.0))

    def __rsub__(self, other):
        return add(_wrap(other), mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` over the axes numpy broadcasting introduced or stretched."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data + b.data, (a, b))

    def _bk(g):
        a.grad += _unbroadcast(g, a.data.shape)
        b.grad += _unbroadcast(g, b.data.shape)

    out._backward = _bk
    return out


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data * b.data, (a, b))

    def _bk(g):
        a.grad += _unbroadcast(g * b.data, a.data.shape)
        b.grad += _unbroadcast(g * a.data, b.data.shape)

    out._backward = _bk
    return out


def div(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data / b.data, (a, b))

    def _bk(g):
        a.grad += _unbroadcast(g / b.data, a.data.shape)
        b.grad += _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)

    out._backward = _bk
    return out


def power(a, exponent: float) -> Tensor:
    a = _wrap(a)
    p = float(exponent)
    out = Tensor(a.data**p, (a,))

    def _bk(g):
        a.grad += g * p * a.data ** (p - 1.0)

    out._backward = _bk
    return out


def sqrt(a) -> Tensor:
    return power(a, 0.5)


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data, (a, b))

    def _bk(g):
        a.grad += g @ b.data.T
        b.grad += a.data.T @ g

    out._backward = _bk
    return out


def exp(a) -> Tensor:
    a = _wrap(a)
    out = Tensor(np.exp(a.data), (a,))

    def _bk(g):
        a.grad += g * out.data

    out._backward = _bk
    return out


def log(a) -> Tensor:
    a = _wrap(a)
    out = Tensor(np.log(a.data), (a,))

    def _bk(g):
        a.grad += g / a.data

    out._backward = _bk
    return out


def tanh(a) -> Tensor:
    a = _wrap(a)
    out = Tensor(np.tanh(a.data), (a,))

    def _bk(g):
        a.grad += g * (1.0 - out.data * out.data)

    out._backward = _bk
    return out


def relu(a) -> Tensor:
    a = _wrap(a)
    out = Tensor(np.maximum(a.data, 0.0), (a,))

    def _bk(g):
        a.grad += g * (a.data > 0.0)

    out._backward = _bk
    return out


def softplus(a) -> Tensor:
    """log(1 + exp(x)), computed without overflow for large |x|."""
    a = _wrap(a)
    out = Tensor(np.maximum(a.data, 0.0) + np.log1p(np.exp(-np.abs(a.data))), (a,))

    def _bk(g):
        # d softplus / dx = sigmoid(x), written overflow-free
        e = np.exp(-np.abs(a.data))
        sig = np.where(a.data >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))
        a.grad += g * sig

    out._backward = _bk
    return out


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _wrap(a)
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims), (a,))

    def _bk(g):
        if axis is None:
            a.grad += np.broadcast_to(g, a.data.shape)
        else:
            if not keepdims:
                g = np.expand_dims(g, axis)
            a.grad += np.broadcast_to(g, a.data.shape)

    out._backward = _bk
    return out


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _wrap(a)
    if axis is None:
        count = a.size
    else:
        count = a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    out = Tensor(a.data.reshape(shape), (a,))

    def _bk(g):
        a.grad += g.reshape(a.data.shape)

    out._backward = _bk
    return out


def transpose(a) -> Tensor:
    a = _wrap(a)
    if a.ndim != 2:
        raise ValueError("transpose expects a 2-D tensor")
    out = Tensor(a.data.T, (a,))

    def _bk(g):
        a.grad += g.T

    out._backward = _bk
    return out


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    if not tensors:
        raise ValueError("concat of an empty sequence")
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors))
    offsets = np.cumsum([0] + [t.data.shape[axis] for t in tensors])

    def _bk(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            index = [slice(None)] * g.ndim
            index[axis] = slice(lo, hi)
            t.grad += g[tuple(index)]

    out._backward = _bk
    return out


def gather_rows(a, indices) -> Tensor:
    """out[..., :] = a[indices[...], :]; backward scatter-adds into a."""
    a = _wrap(a)
    idx = np.asarray(indices, dtype=np.int64)
    out = Tensor(a.data[idx], (a,))

    def _bk(g):
        np.add.at(a.grad, idx.reshape(-1), g.reshape(-1, *a.data.shape[1:]))

    out._backward = _bk
    return out


def logsumexp(a) -> Tensor:
    """log sum exp of a 1-D tensor, shifted by the max to avoid overflow."""
    a = _wrap(a)
    if a.size == 0:
        raise ValueError("empty reduction")
    if a.ndim != 1:
        raise ValueError("logsumexp expects a 1-D tensor")
    m = a.data.max()
    shifted = np.exp(a.data - m)
    total = shifted.sum()
    out = Tensor(m + np.log(total), (a,))

    def _bk(g):
        a.grad += g * shifted / total

    out._backward = _bk
    return out


def logsumexp_rows(a) -> Tensor:
    """Row-wise log sum exp of a 2-D tensor, returning shape [n, 1]."""
    a = _wrap(a)
    if a.ndim != 2 or a.data.shape[1] == 0:
        raise ValueError("logsumexp_rows expects a non-empty 2-D tensor")
    m = a.data.max(axis=1, keepdims=True)
    shifted = np.exp(a.data - m)
    totals = shifted.sum(axis=1, keepdims=True)
    out = Tensor(m + np.log(totals), (a,))

    def _bk(g):
        a.grad += g * shifted / totals

    out._backward = _bk
    return out


def _guarded(norm: Tensor, eps: float) -> Tensor:
    # max(norm, eps) == relu(norm - eps) + eps; keeps the division defined
    # for all-zero inputs without disturbing unit-norm outputs elsewhere
    return add(relu(add(norm, -eps)), eps)


def l2_normalize(v, eps: float = NORM_EPS) -> Tensor:
    """Scale a 1-D tensor to unit Euclidean norm.

    The denominator is floored at ``eps`` so an all-zero input maps to an
    all-zero output; that event is counted in ``diagnostics`` rather than
    raised.
    """
    v = _wrap(v)
    if v.ndim != 1:
        raise ValueError("l2_normalize expects a 1-D tensor")
    if float(np.linalg.norm(v.data)) == 0.0:
        diagnostics["l2_normalize_zero_vector"] += 1
    norm = sqrt(tsum(mul(v, v)))
    return div(v, _guarded(norm, eps))


def l2_normalize_rows(a, eps: float = NORM_EPS) -> Tensor:
    """Row-wise unit normalization of a 2-D tensor, same fallback as above."""
    a = _wrap(a)
    if a.ndim != 2:
        raise ValueError("l2_normalize_rows expects a 2-D tensor")
    zero_rows = int(np.sum(np.linalg.norm(a.data, axis=1) == 0.0))
    if zero_rows:
        diagnostics["l2_normalize_zero_vector"] += zero_rows
    norms = sqrt(tsum(mul(a, a), axis=1, keepdims=True))
    return div(a, _guarded(norms, eps))


def conv2d(x, w, b, stride: int = 2, padding: int = 1) -> Tensor:
    """2-D convolution via im2col; x [N,C,H,W], w [F,C,k,k], b [F]."""
    x, w, b = _wrap(x), _wrap(w), _wrap(b)
    n, c, h, wid = x.data.shape
    f, c2, kh, kw = w.data.shape
    if c != c2:
        raise ValueError(f"channel mismatch: input {c}, kernel {c2}")
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wid + 2 * padding - kw) // stride + 1
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))

    cols = np.empty((n, c, kh, kw, oh, ow), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
    patches = cols.transpose(0, 4, 5, 1, 2, 3).reshape(n * oh * ow, c * kh * kw)
    flat = patches @ w.data.reshape(f, -1).T + b.data
    out = Tensor(flat.reshape(n, oh, ow, f).transpose(0, 3, 1, 2), (x, w, b))

    def _bk(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(n * oh * ow, f)
        b.grad += g2.sum(axis=0)
        w.grad += (g2.T @ patches).reshape(f, c, kh, kw)
        gp = (g2 @ w.data.reshape(f, -1)).reshape(n, oh, ow, c, kh, kw).transpose(0, 3, 4, 5, 1, 2)
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gxp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += gp[:, :, i, j]
        if padding:
            gxp = gxp[:, :, padding:-padding, padding:-padding]
        x.grad += gxp

    out._backward = _bk
    return out


def layer_norm(a, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize each row of a 2-D tensor to zero mean / unit variance."""
    mu = tmean(a, axis=1, keepdims=True)
    centered = add(a, mul(mu, -1.0))
    var = tmean(mul(centered, centered), axis=1, keepdims=True)
    normed = div(centered, sqrt(add(var, eps)))
    return add(mul(normed, gain), bias)


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` for every tensor in the graph below a scalar loss."""
    if loss.data.ndim != 0:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")

    topo = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))

    for node in topo:
        node.grad = np.zeros_like(node.data)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)


class Adam:
    """Adam with bias correction; update is -lr * m_hat / (sqrt(v_hat) + eps)."""

    def __init__(self, params, lr: float = 0.001, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise ValueError("parameter has no gradient; run backward first")
            g = p.grad
            if g.shape != p.data.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {p.data.shape}")
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def gradient_check(loss_fn, params, h: float = 1e-5, guard: float = 1e-4):
    """Compare analytic gradients of loss_fn() against central differences.

    ``loss_fn`` must rebuild the graph from ``params`` on each call. Returns
    (max_rel_err, per_param list).  The relative error denominator is floored
    at ``guard`` so near-zero gradients are compared absolutely, above the
    h^2-truncation and round-off noise floor of the difference quotient.
    """
    loss = loss_fn()
    backward(loss)
    analytic = [p.grad.copy() for p in params]

    worst = 0.0
    per_param = []
    for p, a in zip(params, analytic):
        flat = p.data.reshape(-1)
        aflat = a.reshape(-1)
        p_worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(loss_fn().data)
            flat[i] = orig - h
            down = float(loss_fn().data)
            flat[i] = orig
            numeric = (up - down) / (2.0 * h)
            rel = abs(aflat[i] - numeric) / max(abs(aflat[i]), abs(numeric), guard)
            if rel > p_worst:
                p_worst = rel
        per_param.append(p_worst)
        worst = max(worst, p_worst)
    return worst, per_param
