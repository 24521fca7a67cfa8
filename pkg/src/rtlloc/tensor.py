"""Minimal dense-tensor engine with reverse-mode differentiation.

64-bit floats throughout; numpy provides storage and kernels, the tape and
every derivative live here. Shapes are small (desk scale), so clarity and
exact gradients win over throughput tricks.
"""
from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    pass


class DomainError(ValueError):
    pass


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ShapeError("backward() without grad requires a scalar")
            grad = np.ones_like(self.data)
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = _as_array(grad)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def _accum(self, g: np.ndarray):
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over axes that numpy broadcasting expanded."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ------------------------------------------------------------- arithmetic

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data

    def backward(g):
        a._accum(_unbroadcast(g, a.data.shape))
        b._accum(_unbroadcast(g, b.data.shape))
    return _make(data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data - b.data

    def backward(g):
        a._accum(_unbroadcast(g, a.data.shape))
        b._accum(_unbroadcast(-g, b.data.shape))
    return _make(data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data

    def backward(g):
        a._accum(_unbroadcast(g * b.data, a.data.shape))
        b._accum(_unbroadcast(g * a.data, b.data.shape))
    return _make(data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data / b.data

    def backward(g):
        a._accum(_unbroadcast(g / b.data, a.data.shape))
        b._accum(_unbroadcast(-g * a.data / (b.data ** 2), b.data.shape))
    return _make(data, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data @ b.data

    def backward(g):
        if a.data.ndim == 1 and b.data.ndim == 2:
            a._accum(g @ b.data.T)
            b._accum(np.outer(a.data, g))
        elif a.data.ndim == 2 and b.data.ndim == 1:
            a._accum(np.outer(g, b.data))
            b._accum(a.data.T @ g)
        elif a.data.ndim == 1 and b.data.ndim == 1:
            a._accum(g * b.data)
            b._accum(g * a.data)
        else:
            a._accum(g @ np.swapaxes(b.data, -1, -2))
            b._accum(np.swapaxes(a.data, -1, -2) @ g)
    return _make(data, (a, b), backward)


def exp(a) -> Tensor:
    a = as_tensor(a)
    data = np.exp(a.data)

    def backward(g):
        a._accum(g * data)
    return _make(data, (a,), backward)


def log(a) -> Tensor:
    a = as_tensor(a)
    data = np.log(a.data)

    def backward(g):
        a._accum(g / a.data)
    return _make(data, (a,), backward)


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    data = np.sqrt(a.data)

    def backward(g):
        a._accum(g * 0.5 / data)
    return _make(data, (a,), backward)


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    a = as_tensor(a)
    mask = np.where(a.data > 0.0, 1.0, slope)
    data = a.data * mask

    def backward(g):
        a._accum(g * mask)
    return _make(data, (a,), backward)


def relu(a) -> Tensor:
    return leaky_relu(a, 0.0)


def hinge(a) -> Tensor:
    """max(0, a) with subgradient 0 at the kink."""
    a = as_tensor(a)
    mask = (a.data > 0.0).astype(np.float64)
    data = a.data * mask

    def backward(g):
        a._accum(g * mask)
    return _make(data, (a,), backward)


# --------------------------------------------------------------- reshaping

def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.data.shape
    data = a.data.reshape(shape)

    def backward(g):
        a._accum(g.reshape(old))
    return _make(data, (a,), backward)


def concat(parts, axis: int = -1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        for p, piece in zip(parts, np.split(g, splits, axis=axis)):
            p._accum(piece)
    return _make(data, tuple(parts), backward)


# ------------------------------------------------------------- reductions

def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            a._accum(np.broadcast_to(g, a.data.shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            a._accum(np.broadcast_to(gg, a.data.shape).copy())
    return _make(data, (a,), backward)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        n = a.data.size
    else:
        n = a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def tmax(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.max(axis=axis, keepdims=keepdims)

    def backward(g):
        full = data if keepdims or axis is None else np.expand_dims(data, axis)
        mask = (a.data == full).astype(np.float64)
        mask /= mask.sum(axis=axis, keepdims=True) if axis is not None else mask.sum()
        gg = g if keepdims or axis is None else np.expand_dims(g, axis)
        a._accum(mask * gg)
    return _make(data, (a,), backward)


# ---------------------------------------------------------- gather/segment

def gather_rows(a, idx) -> Tensor:
    """out[i] = a[idx[i]]; backward scatter-adds into the source rows."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    data = a.data[idx]

    def backward(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, idx, g)
        a._accum(ga)
    return _make(data, (a,), backward)


def segment_sum(a, seg, num_segments: int) -> Tensor:
    """out[s] = sum of rows of a where seg == s."""
    a = as_tensor(a)
    seg = np.asarray(seg, dtype=np.int64)
    out_shape = (num_segments,) + a.data.shape[1:]
    data = np.zeros(out_shape, dtype=np.float64)
    np.add.at(data, seg, a.data)

    def backward(g):
        a._accum(g[seg])
    return _make(data, (a,), backward)


def segment_mean(a, seg, num_segments: int) -> Tensor:
    seg = np.asarray(seg, dtype=np.int64)
    counts = np.bincount(seg, minlength=num_segments).astype(np.float64)
    counts[counts == 0] = 1.0
    s = segment_sum(a, seg, num_segments)
    inv = 1.0 / counts
    if s.data.ndim > 1:
        inv = inv.reshape((-1,) + (1,) * (s.data.ndim - 1))
    return mul(s, inv)


def segment_softmax(scores, seg, num_segments: int) -> Tensor:
    """Softmax over entries sharing a segment id (attention normalization)."""
    scores = as_tensor(scores)
    seg = np.asarray(seg, dtype=np.int64)
    x = scores.data
    seg_max = np.full(num_segments, -np.inf)
    np.maximum.at(seg_max, seg, x)
    shifted = x - seg_max[seg]
    e = np.exp(shifted)
    denom = np.zeros(num_segments)
    np.add.at(denom, seg, e)
    alpha = e / denom[seg]

    def backward(g):
        # d alpha_i / d score_j = alpha_i (delta_ij - alpha_j) within a segment
        weighted = np.zeros(num_segments)
        np.add.at(weighted, seg, g * alpha)
        scores._accum(alpha * (g - weighted[seg]))
    return _make(alpha, (scores,), backward)


# -------------------------------------------------------------- composites

def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shift = Tensor(a.data.max(axis=axis, keepdims=True))  # constant: grads cancel
    e = exp(sub(a, shift))
    return div(e, tsum(e, axis=axis, keepdims=True))


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shift = Tensor(a.data.max(axis=axis, keepdims=True))
    z = sub(a, shift)
    lse = log(tsum(exp(z), axis=axis, keepdims=True))
    return sub(z, lse)


def l2_normalize(a, axis: int = -1) -> Tensor:
    """Rows scaled to unit Euclidean norm; zero rows are an error."""
    a = as_tensor(a)
    norms = np.linalg.norm(a.data, axis=axis)
    if np.any(norms == 0.0):
        raise DomainError("cannot l2-normalize a zero vector")
    n = sqrt(tsum(mul(a, a), axis=axis, keepdims=True))
    return div(a, n)


def cosine_similarity(a, b, axis: int = -1) -> Tensor:
    return tsum(mul(l2_normalize(a, axis), l2_normalize(b, axis)), axis=axis)


def dropout(a, p: float, rng: np.random.Generator, train: bool) -> Tensor:
    """Inverted dropout with a seeded mask; identity in eval mode."""
    if not train or p <= 0.0:
        return as_tensor(a)
    a = as_tensor(a)
    mask = (rng.random(a.data.shape) >= p).astype(np.float64) / (1.0 - p)
    return mul(a, Tensor(mask))
