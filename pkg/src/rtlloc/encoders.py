"""The three expert encoders and the intent-aware router.

All block and query embeddings live in a shared unit-norm space: text and
local embeddings are 384-wide, design-wide embeddings are projected to 128
together with a matching query projection.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .config import ModelConfig
from .dfg import (BlockDfg, Category, OperatorType, Role, Timing,
                  hash_identifier, normalize_bitwidth)
from .dtg import DesignTopologyGraph
from .layers import Affine, Embedding, GatV2Layer, LayerNorm, Module
from .tensor import (Tensor, add, concat, dropout, gather_rows, l2_normalize,
                     leaky_relu, matmul, mul, reshape, segment_mean, softmax)


class EmptyTextError(ValueError):
    pass


class EmptyGraphError(ValueError):
    pass


class MissingEmbeddingError(KeyError):
    pass


_CAT_INDEX = {c: i for i, c in enumerate(Category.ALL)}
_OP_INDEX = {o: i for i, o in enumerate(OperatorType.ALL)}
_ROLE_INDEX = {r: i for i, r in enumerate(Role.ALL)}
_TIMING_INDEX = {Timing.COMBINATIONAL: 0, Timing.SEQUENTIAL: 1}

_WS_RE = re.compile(r"\s+")


def char_ngrams(text: str, lo: int = 3, hi: int = 5) -> list[str]:
    norm = _WS_RE.sub(" ", text.strip().lower())
    grams: list[str] = []
    for n in range(lo, hi + 1):
        if len(norm) < n:
            break
        grams.extend(norm[i:i + n] for i in range(len(norm) - n + 1))
    if not grams:
        grams = [norm]
    return grams


class TextEncoderModel(Module):
    """Character n-gram hashing bi-encoder over the shared 384-dim space."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        self.table = self.param("table", 0.1 * rng.standard_normal(
            (cfg.text_vocab, cfg.text_dim)))
        proj = Affine(rng, cfg.text_dim, cfg.text_dim)
        self.adopt("proj", proj)
        self.proj = proj

    def _bucket_ids(self, text: str) -> np.ndarray:
        if not text.strip():
            raise EmptyTextError("cannot encode empty text")
        grams = char_ngrams(text)
        return np.array([hash_identifier(g, self.cfg.text_vocab)
                         for g in grams], dtype=np.int64)

    def encode_batch(self, texts: list[str]) -> Tensor:
        """Unit-norm embeddings for a batch of texts, shape [k, 384]."""
        idx_parts, seg_parts = [], []
        for j, text in enumerate(texts):
            ids = self._bucket_ids(text)
            idx_parts.append(ids)
            seg_parts.append(np.full(len(ids), j, dtype=np.int64))
        idx = np.concatenate(idx_parts)
        seg = np.concatenate(seg_parts)
        pooled = segment_mean(gather_rows(self.table.tensor, idx),
                              seg, len(texts))
        return l2_normalize(self.proj(pooled), axis=-1)

    def encode(self, text: str) -> Tensor:
        return reshape(self.encode_batch([text]), (self.cfg.text_dim,))


@dataclass
class _DfgBatch:
    """Disjoint union of several block DFGs."""
    id_idx: np.ndarray
    cat_idx: np.ndarray
    op_idx: np.ndarray
    widths: np.ndarray        # normalized width, 0 where unknown
    width_known: np.ndarray   # 1 where bit_width set
    src: np.ndarray
    dst: np.ndarray
    role_idx: np.ndarray
    timing_idx: np.ndarray
    graph_seg: np.ndarray
    num_graphs: int


def _batch_dfgs(dfgs: list[BlockDfg], cfg: ModelConfig) -> _DfgBatch:
    id_idx, cat_idx, op_idx, widths, known = [], [], [], [], []
    src, dst, role_idx, timing_idx, graph_seg = [], [], [], [], []
    offset = 0
    for gi, dfg in enumerate(dfgs):
        if not dfg.nodes:
            raise EmptyGraphError(f"block {dfg.block_id!r} has an empty DFG")
        for nd in dfg.nodes:
            id_idx.append(nd.hashed_name % cfg.id_vocab)
            cat_idx.append(_CAT_INDEX[nd.category])
            op_idx.append(_OP_INDEX[nd.operator_type])
            if nd.bit_width is not None and nd.bit_width >= 1:
                widths.append(normalize_bitwidth(nd.bit_width, cfg.w_max))
                known.append(1.0)
            else:
                widths.append(0.0)
                known.append(0.0)
            graph_seg.append(gi)
        for e in dfg.edges:
            src.append(e.src + offset)
            dst.append(e.dst + offset)
            role_idx.append(_ROLE_INDEX[e.role])
            timing_idx.append(_TIMING_INDEX[e.timing])
        offset += len(dfg.nodes)
    return _DfgBatch(
        np.array(id_idx, dtype=np.int64), np.array(cat_idx, dtype=np.int64),
        np.array(op_idx, dtype=np.int64), np.array(widths),
        np.array(known), np.array(src, dtype=np.int64),
        np.array(dst, dtype=np.int64), np.array(role_idx, dtype=np.int64),
        np.array(timing_idx, dtype=np.int64),
        np.array(graph_seg, dtype=np.int64), len(dfgs))


class LocalEncoderModel(Module):
    """GATv2 encoder over block-local DFGs, projected into the shared space."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        self.id_emb = Embedding(rng, cfg.id_vocab, cfg.local_id_dim)
        self.cat_emb = Embedding(rng, len(Category.ALL), cfg.local_cat_dim)
        self.op_emb = Embedding(rng, len(OperatorType.ALL), cfg.local_op_dim)
        self.width_scale = self.param(
            "width_scale", xavier_like(rng, cfg.local_width_dim))
        self.width_default = self.param(
            "width_default", xavier_like(rng, cfg.local_width_dim))
        half = cfg.local_edge_dim // 2
        self.role_emb = Embedding(rng, len(Role.ALL), half)
        self.timing_emb = Embedding(rng, 2, cfg.local_edge_dim - half)
        d_in = (cfg.local_id_dim + cfg.local_cat_dim + cfg.local_op_dim
                + cfg.local_width_dim)
        self.gats = []
        for i in range(cfg.local_layers):
            gat = GatV2Layer(rng, d_in if i == 0 else cfg.local_hidden,
                             cfg.local_hidden, cfg.local_edge_dim)
            self.gats.append(gat)
            self.adopt(f"gat{i}", gat)
        proj = Affine(rng, cfg.local_hidden, cfg.text_dim)
        self.adopt("wp", proj)
        self.wp = proj
        for name, sub in (("id_emb", self.id_emb), ("cat_emb", self.cat_emb),
                          ("op_emb", self.op_emb), ("role_emb", self.role_emb),
                          ("timing_emb", self.timing_emb)):
            self.adopt(name, sub)

    def encode_batch(self, dfgs: list[BlockDfg], *, train: bool = False,
                     rng: np.random.Generator | None = None) -> Tensor:
        """Unit-norm embeddings [len(dfgs), 384]."""
        b = _batch_dfgs(dfgs, self.cfg)
        width_lane = add(
            mul(Tensor(b.widths.reshape(-1, 1)),
                reshape(self.width_scale.tensor, (1, -1))),
            mul(Tensor((1.0 - b.width_known).reshape(-1, 1)),
                reshape(self.width_default.tensor, (1, -1))))
        h = concat([self.id_emb(b.id_idx), self.cat_emb(b.cat_idx),
                    self.op_emb(b.op_idx), width_lane], axis=-1)
        if len(b.src):
            efeat = concat([self.role_emb(b.role_idx),
                            self.timing_emb(b.timing_idx)], axis=-1)
        else:
            efeat = Tensor(np.zeros((0, self.cfg.local_edge_dim)))
        for i, gat in enumerate(self.gats):
            h = gat(h, b.src, b.dst, efeat)
            if i + 1 < len(self.gats):
                h = leaky_relu(h, 0.2)
                if train and rng is not None:
                    h = dropout(h, self.cfg.dropout, rng, train=True)
        pooled = segment_mean(h, b.graph_seg, b.num_graphs)
        return l2_normalize(self.wp(pooled), axis=-1)

    def encode(self, dfg: BlockDfg) -> Tensor:
        return reshape(self.encode_batch([dfg]), (self.cfg.text_dim,))


def xavier_like(rng: np.random.Generator, dim: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (dim + 1))
    return rng.uniform(-limit, limit, size=dim)


class GlideModel(Module):
    """Design-wide encoder over the topology graph.

    Query-agnostic: one pass per snapshot yields every block's global
    embedding; queries only go through the 384 -> 128 projection head.
    """

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        d = cfg.glide_hidden
        inp = Affine(rng, 2 * cfg.text_dim, d)
        self.adopt("inp", inp)
        self.inp = inp
        self.edge_emb = Embedding(rng, len(Role.ALL) * 2, cfg.glide_edge_dim)
        self.adopt("edge_emb", self.edge_emb)
        self.gats, self.norms = [], []
        for i in range(cfg.glide_layers):
            gat = GatV2Layer(rng, d, d, cfg.glide_edge_dim)
            ln = LayerNorm(d)
            self.gats.append(gat)
            self.norms.append(ln)
            self.adopt(f"gat{i}", gat)
            self.adopt(f"ln{i}", ln)
        phi_g = Affine(rng, d, cfg.glide_proj_dim)
        phi_q = Affine(rng, cfg.text_dim, cfg.glide_proj_dim)
        self.adopt("phi_g", phi_g)
        self.adopt("phi_q", phi_q)
        self.phi_g, self.phi_q = phi_g, phi_q

    def encode_blocks(self, dtg: DesignTopologyGraph,
                      text_embeds: dict[str, np.ndarray] | np.ndarray,
                      local_embeds: dict[str, np.ndarray] | np.ndarray,
                      *, train: bool = False,
                      rng: np.random.Generator | None = None) -> Tensor:
        """Unit-norm per-block embeddings [len(dtg.nodes), 128]."""
        order = {bid: i for i, bid in enumerate(dtg.nodes)}
        if isinstance(text_embeds, dict):
            for bid in dtg.nodes:
                if bid not in text_embeds:
                    raise MissingEmbeddingError(f"no text embedding for {bid!r}")
                if bid not in local_embeds:
                    raise MissingEmbeddingError(f"no local embedding for {bid!r}")
            t = np.stack([text_embeds[bid] for bid in dtg.nodes])
            l = np.stack([local_embeds[bid] for bid in dtg.nodes])
        else:
            t, l = text_embeds, local_embeds
        x = concat([Tensor(t) if not isinstance(t, Tensor) else t,
                    Tensor(l) if not isinstance(l, Tensor) else l], axis=-1)
        h = self.inp(x)
        src = np.array([order[e.src] for e in dtg.edges], dtype=np.int64)
        dst = np.array([order[e.dst] for e in dtg.edges], dtype=np.int64)
        pair_idx = np.array(
            [_ROLE_INDEX[e.role] * 2 + _TIMING_INDEX[e.timing]
             for e in dtg.edges], dtype=np.int64)
        efeat = (self.edge_emb(pair_idx) if len(dtg.edges)
                 else Tensor(np.zeros((0, self.cfg.glide_edge_dim))))
        for gat, ln in zip(self.gats, self.norms):
            msg = leaky_relu(gat(h, src, dst, efeat), 0.2)
            if train and rng is not None:
                msg = dropout(msg, self.cfg.dropout, rng, train=True)
            h = ln(add(h, msg))
        return l2_normalize(self.phi_g(h), axis=-1)

    def project_queries(self, q: Tensor) -> Tensor:
        """Map unit-norm 384-dim queries into the 128-dim global space."""
        single = q.data.ndim == 1
        if single:
            q = reshape(q, (1, -1))
        out = l2_normalize(self.phi_q(q), axis=-1)
        return reshape(out, (self.cfg.glide_proj_dim,)) if single else out


class RouterModel(Module):
    """Query-conditioned simplex weights over the three experts."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        fc1 = Affine(rng, cfg.text_dim, cfg.router_hidden)
        fc2 = Affine(rng, cfg.router_hidden, 3)
        self.adopt("fc1", fc1)
        self.adopt("fc2", fc2)
        self.fc1, self.fc2 = fc1, fc2

    def route(self, q_vec: Tensor, *, train: bool = False,
              rng: np.random.Generator | None = None) -> Tensor:
        single = q_vec.data.ndim == 1
        if single:
            q_vec = reshape(q_vec, (1, -1))
        h = leaky_relu(self.fc1(q_vec), 0.2)
        if train and rng is not None:
            h = dropout(h, self.cfg.dropout, rng, train=True)
        alpha = softmax(self.fc2(h), axis=-1)
        return reshape(alpha, (3,)) if single else alpha


@dataclass(frozen=True)
class EvidenceVector:
    s_txt: float
    s_loc: float
    s_glob: float

    def as_array(self) -> np.ndarray:
        return np.array([self.s_txt, self.s_loc, self.s_glob])


def fuse_score(alpha: np.ndarray, v: EvidenceVector) -> float:
    """Adaptive aggregation: dot product of simplex weights with evidence."""
    return float(np.dot(np.asarray(alpha, dtype=np.float64), v.as_array()))


def fuse_scores(alpha: np.ndarray, evidence: np.ndarray) -> np.ndarray:
    """Vectorized fusion over an [n, 3] evidence matrix."""
    return np.asarray(evidence, dtype=np.float64) @ np.asarray(alpha)
