"""Snapshot indexing and query-time ranking."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Corpus
from .encoders import EvidenceVector, GlideModel, LocalEncoderModel, \
    RouterModel, TextEncoderModel, fuse_scores
from .tensor import Tensor


class EmptyIndex(ValueError):
    pass


@dataclass
class SnapshotIndex:
    snapshot_id: str
    block_ids: list[str]
    text_embeds: np.ndarray    # [n, 384]
    local_embeds: np.ndarray   # [n, 384]
    global_embeds: np.ndarray  # [n, 128]
    metadata: dict[str, dict] = field(default_factory=dict)
    build_seconds: float = 0.0

    def save(self, path):
        """One JSONL record per block with all three embeddings."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            fh.write(json.dumps({"snapshot_id": self.snapshot_id,
                                 "num_blocks": len(self.block_ids)}) + "\n")
            for i, bid in enumerate(self.block_ids):
                fh.write(json.dumps({
                    "block_id": bid,
                    "text": self.text_embeds[i].tolist(),
                    "local": self.local_embeds[i].tolist(),
                    "global": self.global_embeds[i].tolist(),
                    "meta": self.metadata.get(bid, {}),
                }, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "SnapshotIndex":
        with open(path) as fh:
            header = json.loads(fh.readline())
            ids, t, l, g, meta = [], [], [], [], {}
            for line in fh:
                rec = json.loads(line)
                ids.append(rec["block_id"])
                t.append(rec["text"])
                l.append(rec["local"])
                g.append(rec["global"])
                meta[rec["block_id"]] = rec.get("meta", {})
        return cls(header["snapshot_id"], ids, np.array(t), np.array(l),
                   np.array(g), meta)


@dataclass
class RankedResult:
    query_id: str
    items: list[tuple[str, float, EvidenceVector]]  # sorted by score desc
    alpha: np.ndarray

    def block_ids(self) -> list[str]:
        return [bid for bid, _, _ in self.items]


def build_index(snapshot_id: str, corpus: Corpus, text: TextEncoderModel,
                local: LocalEncoderModel, glide: GlideModel) -> SnapshotIndex:
    """One full embedding pass over a snapshot (the cached query-agnostic part)."""
    t0 = time.perf_counter()
    bids = corpus.blocks_by_snapshot[snapshot_id]
    t = text.encode_batch([corpus.block_text[b] for b in bids]).data.copy()
    l = local.encode_batch([corpus.dfgs[b] for b in bids]).data.copy()
    g = glide.encode_blocks(corpus.dtgs[snapshot_id], t, l).data.copy()
    snap = corpus.snapshots[snapshot_id]
    meta = {blk.block_id: {"kind": blk.kind, "module": blk.module_name,
                           "path": blk.path}
            for blk in snap.blocks}
    return SnapshotIndex(snapshot_id, list(bids), t, l, g, meta,
                         build_seconds=time.perf_counter() - t0)


def score_query(query_text: str, index: SnapshotIndex,
                text: TextEncoderModel, glide: GlideModel,
                router: RouterModel):
    """(alpha, evidence[n,3], fused[n]) for one query against an index."""
    if not index.block_ids:
        raise EmptyIndex(f"snapshot {index.snapshot_id!r} has no blocks")
    qv = text.encode(query_text).data
    alpha = router.route(Tensor(qv)).data
    qg = glide.project_queries(Tensor(qv)).data
    evidence = np.stack([index.text_embeds @ qv, index.local_embeds @ qv,
                         index.global_embeds @ qg], axis=1)
    fused = fuse_scores(alpha, evidence)
    return alpha, evidence, fused


def rank_by_scores(query_id: str, block_ids: list[str], scores: np.ndarray,
                   evidence: np.ndarray | None = None,
                   alpha: np.ndarray | None = None) -> RankedResult:
    """Descending-score order with ascending block_id as the tiebreak."""
    order = sorted(range(len(block_ids)),
                   key=lambda i: (-scores[i], block_ids[i]))
    items = []
    for i in order:
        ev = (EvidenceVector(*evidence[i]) if evidence is not None
              else EvidenceVector(0.0, 0.0, 0.0))
        items.append((block_ids[i], float(scores[i]), ev))
    return RankedResult(query_id, items,
                        alpha if alpha is not None else np.full(3, 1 / 3))


def rank(query_text: str, index: SnapshotIndex, text: TextEncoderModel,
         glide: GlideModel, router: RouterModel,
         query_id: str = "q") -> RankedResult:
    alpha, evidence, fused = score_query(query_text, index, text, glide, router)
    return rank_by_scores(query_id, index.block_ids, fused, evidence, alpha)
