"""Parameters, initialization and the layers the encoders are built from."""
from __future__ import annotations

import numpy as np

from .tensor import (ShapeError, Tensor, add, concat, div, gather_rows,
                     leaky_relu, matmul, mul, reshape, segment_softmax,
                     segment_sum, sqrt, sub, tmean, tsum)


class Parameter:
    def __init__(self, name: str, data: np.ndarray, frozen: bool = False):
        self.name = name
        self.tensor = Tensor(np.asarray(data, dtype=np.float64),
                             requires_grad=not frozen)
        self._frozen = frozen

    @property
    def frozen(self) -> bool:
        return self._frozen

    @frozen.setter
    def frozen(self, value: bool):
        self._frozen = value
        self.tensor.requires_grad = not value

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    def __repr__(self):
        return f"Parameter({self.name}, shape={self.data.shape}, frozen={self.frozen})"


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    if shape is None:
        shape = (fan_in, fan_out)
    return rng.uniform(-limit, limit, size=shape)


class Module:
    """Flat parameter registry; submodules register with a name prefix."""

    def __init__(self):
        self._params: dict[str, Parameter] = {}

    def param(self, name: str, data: np.ndarray) -> Parameter:
        p = Parameter(name, data)
        self._params[name] = p
        return p

    def adopt(self, prefix: str, sub: "Module"):
        for name, p in sub._params.items():
            self._params[f"{prefix}.{name}"] = p

    def parameters(self) -> dict[str, Parameter]:
        return dict(self._params)

    def trainable(self) -> list[Parameter]:
        return [p for p in self._params.values() if not p.frozen]

    def set_frozen(self, frozen: bool):
        for p in self._params.values():
            p.frozen = frozen

    def num_params(self) -> int:
        return sum(p.data.size for p in self._params.values())

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self._params.items()}

    def load_state(self, arrays: dict[str, np.ndarray]):
        for name, p in self._params.items():
            if name not in arrays:
                raise KeyError(f"checkpoint missing parameter {name!r}")
            if arrays[name].shape != p.data.shape:
                raise ShapeError(
                    f"{name}: checkpoint shape {arrays[name].shape} "
                    f"!= model shape {p.data.shape}")
            p.tensor.data = arrays[name].astype(np.float64).copy()


class Affine(Module):
    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int):
        super().__init__()
        self.d_in, self.d_out = d_in, d_out
        self.w = self.param("w", xavier_uniform(rng, d_in, d_out))
        self.b = self.param("b", np.zeros(d_out))

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.shape[-1] != self.d_in:
            raise ShapeError(f"affine expects last dim {self.d_in}, "
                             f"got {x.data.shape}")
        return add(matmul(x, self.w.tensor), self.b.tensor)


class LayerNorm(Module):
    def __init__(self, d: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.g = self.param("g", np.ones(d))
        self.b = self.param("b", np.zeros(d))

    def __call__(self, x: Tensor) -> Tensor:
        mu = tmean(x, axis=-1, keepdims=True)
        xc = sub(x, mu)
        var = tmean(mul(xc, xc), axis=-1, keepdims=True)
        inv = div(1.0, sqrt(add(var, self.eps)))
        return add(mul(mul(xc, inv), self.g.tensor), self.b.tensor)


class GatV2Layer(Module):
    """Single-head GATv2 with additive edge features.

    score(u->v) = a . LeakyReLU(Ws h_u + Wt h_v + We x_e), slope 0.2;
    attention normalizes over the incoming edges of v (self-loop with a
    zero edge feature appended per node); h'_v = sum_u alpha_uv (Ws h_u).
    """

    SLOPE = 0.2

    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int,
                 d_edge: int):
        super().__init__()
        self.d_in, self.d_out, self.d_edge = d_in, d_out, d_edge
        self.ws = self.param("ws", xavier_uniform(rng, d_in, d_out))
        self.wt = self.param("wt", xavier_uniform(rng, d_in, d_out))
        self.we = self.param("we", xavier_uniform(rng, d_edge, d_out))
        self.att = self.param("att", xavier_uniform(rng, d_out, 1,
                                                    shape=(d_out,)))

    def __call__(self, h: Tensor, src: np.ndarray, dst: np.ndarray,
                 edge_feats: Tensor | None) -> Tensor:
        n = h.data.shape[0]
        if h.data.shape[-1] != self.d_in:
            raise ShapeError(f"gatv2 expects node dim {self.d_in}, "
                             f"got {h.data.shape}")
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        m = len(src)
        if edge_feats is None:
            edge_feats = Tensor(np.zeros((m, self.d_edge)))
        if edge_feats.data.shape != (m, self.d_edge):
            raise ShapeError(f"edge feature shape {edge_feats.data.shape} "
                             f"!= ({m}, {self.d_edge})")
        # self loops with zero edge features
        loop = np.arange(n, dtype=np.int64)
        src_all = np.concatenate([src, loop])
        dst_all = np.concatenate([dst, loop])
        e_all = concat([edge_feats, Tensor(np.zeros((n, self.d_edge)))], axis=0)

        hs = matmul(h, self.ws.tensor)
        ht = matmul(h, self.wt.tensor)
        z = add(add(gather_rows(hs, src_all), gather_rows(ht, dst_all)),
                matmul(e_all, self.we.tensor))
        scores = matmul(leaky_relu(z, self.SLOPE), self.att.tensor)
        alpha = segment_softmax(scores, dst_all, n)
        msg = mul(gather_rows(hs, src_all), reshape(alpha, (-1, 1)))
        return segment_sum(msg, dst_all, n)


class Embedding(Module):
    def __init__(self, rng: np.random.Generator, size: int, dim: int):
        super().__init__()
        self.size, self.dim = size, dim
        self.table = self.param("table", xavier_uniform(rng, size, dim))

    def __call__(self, idx: np.ndarray) -> Tensor:
        return gather_rows(self.table.tensor, np.asarray(idx, dtype=np.int64))
