"""Paired evaluation on original vs identifier-anonymized snapshots.

Anonymization rewrites every user identifier to VAR_<i>, which changes
module names and therefore block ids. Block order within a file is
unchanged, so each anonymized block is mapped back to its original id
positionally and metrics are computed against the original ground truth.
Model weights are never touched; only the candidate corpus is rewritten.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anonymize import anonymize
from .blocks import Snapshot, build_snapshot
from .bm25 import Bm25Index
from .data import Corpus, TrainingExample
from .encoders import GlideModel, LocalEncoderModel, RouterModel, \
    TextEncoderModel
from .index import SnapshotIndex, build_index, score_query
from .metrics import MetricsReport, compute_metrics

METHODS = ("bm25", "text", "glide", "fused")


class BlockCountMismatch(RuntimeError):
    pass


def anonymize_snapshot(snap: Snapshot) -> tuple[Snapshot, dict[str, str]]:
    """Anonymized twin plus a map from its block ids to the originals."""
    anon = build_snapshot(snap.snapshot_id, [anonymize(f) for f in snap.files])
    id_map: dict[str, str] = {}
    orig_by_path: dict[str, list[str]] = {}
    for blk in snap.blocks:
        orig_by_path.setdefault(blk.path, []).append(blk.block_id)
    anon_by_path: dict[str, list[str]] = {}
    for blk in anon.blocks:
        anon_by_path.setdefault(blk.path, []).append(blk.block_id)
    for path, anon_ids in anon_by_path.items():
        orig_ids = orig_by_path.get(path, [])
        if len(orig_ids) != len(anon_ids):
            raise BlockCountMismatch(
                f"{path}: {len(orig_ids)} blocks before anonymization, "
                f"{len(anon_ids)} after")
        for a, o in zip(anon_ids, orig_ids):
            id_map[a] = o
    return anon, id_map


def _method_rankings(queries: list[TrainingExample], corpus: Corpus,
                     index: SnapshotIndex, text: TextEncoderModel,
                     glide: GlideModel, router: RouterModel
                     ) -> dict[str, dict[str, list[str]]]:
    """Per-method {query_id: ranked block ids} over one snapshot index."""
    bids = index.block_ids
    bm25 = Bm25Index(bids, [corpus.block_text[b] for b in bids])
    out: dict[str, dict[str, list[str]]] = {m: {} for m in METHODS}
    for ex in queries:
        _, evidence, fused = score_query(ex.text, index, text, glide, router)
        per_score = {"text": evidence[:, 0], "glide": evidence[:, 2],
                     "fused": fused}
        for method, sc in per_score.items():
            order = sorted(range(len(bids)), key=lambda i: (-sc[i], bids[i]))
            out[method][ex.query_id] = [bids[i] for i in order]
        out["bm25"][ex.query_id] = bm25.rank(ex.text)
    return out


@dataclass
class RobustnessReport:
    original: dict[str, MetricsReport]
    anonymized: dict[str, MetricsReport]

    def deltas(self) -> dict[str, float]:
        return {m: self.anonymized[m].mrr - self.original[m].mrr
                for m in METHODS}

    def to_json_dict(self) -> dict:
        return {
            "original": {m: r.to_json_dict() for m, r in self.original.items()},
            "anonymized": {m: r.to_json_dict()
                           for m, r in self.anonymized.items()},
            "mrr_delta": self.deltas(),
        }


def evaluate_robustness(dataset: list[TrainingExample], corpus: Corpus,
                        text: TextEncoderModel, local: LocalEncoderModel,
                        glide: GlideModel, router: RouterModel,
                        ks: tuple[int, ...] = (1, 5, 10)) -> RobustnessReport:
    """Same queries and ground truth, with and without identifier names."""
    ground_truth = {ex.query_id: set(ex.positives) for ex in dataset}
    by_snapshot: dict[str, list[TrainingExample]] = {}
    for ex in dataset:
        by_snapshot.setdefault(ex.snapshot_id, []).append(ex)

    orig_rankings: dict[str, dict[str, list[str]]] = {m: {} for m in METHODS}
    anon_rankings: dict[str, dict[str, list[str]]] = {m: {} for m in METHODS}
    for sid, queries in sorted(by_snapshot.items()):
        index = build_index(sid, corpus, text, local, glide)
        for m, r in _method_rankings(queries, corpus, index, text, glide,
                                     router).items():
            orig_rankings[m].update(r)

        anon_snap, id_map = anonymize_snapshot(corpus.snapshots[sid])
        anon_corpus = Corpus.from_snapshots([anon_snap])
        anon_index = build_index(sid, anon_corpus, text, local, glide)
        for m, r in _method_rankings(queries, anon_corpus, anon_index, text,
                                     glide, router).items():
            for qid, ranking in r.items():
                anon_rankings[m][qid] = [id_map[b] for b in ranking]

    return RobustnessReport(
        original={m: compute_metrics(orig_rankings[m], ground_truth, ks)
                  for m in METHODS},
        anonymized={m: compute_metrics(anon_rankings[m], ground_truth, ks)
                    for m in METHODS},
    )
