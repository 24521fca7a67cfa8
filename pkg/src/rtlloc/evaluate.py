"""Dataset-level evaluation: rank every query, aggregate metrics."""
from __future__ import annotations

import time

from .data import Corpus, TrainingExample
from .encoders import GlideModel, LocalEncoderModel, RouterModel, \
    TextEncoderModel
from .index import SnapshotIndex, build_index, rank_by_scores, score_query
from .metrics import MetricsReport, compute_metrics


def build_indexes(corpus: Corpus, text: TextEncoderModel,
                  local: LocalEncoderModel, glide: GlideModel,
                  snapshot_ids=None) -> dict[str, SnapshotIndex]:
    ids = sorted(snapshot_ids) if snapshot_ids else sorted(corpus.snapshots)
    return {sid: build_index(sid, corpus, text, local, glide) for sid in ids}


def rank_dataset(dataset: list[TrainingExample],
                 indexes: dict[str, SnapshotIndex], text: TextEncoderModel,
                 glide: GlideModel, router: RouterModel,
                 measure_latency: bool = False):
    """Rankings plus per-query routing weights for every example.

    Returns (rankings, alphas, mean latency in ms or None). Latency covers
    the per-query work only; index construction is the cached offline part.
    """
    rankings: dict[str, list[str]] = {}
    alphas: dict[str, list[float]] = {}
    elapsed = 0.0
    for ex in dataset:
        index = indexes[ex.snapshot_id]
        t0 = time.perf_counter()
        alpha, evidence, fused = score_query(ex.text, index, text, glide,
                                             router)
        result = rank_by_scores(ex.query_id, index.block_ids, fused,
                                evidence, alpha)
        elapsed += time.perf_counter() - t0
        rankings[ex.query_id] = result.block_ids()
        alphas[ex.query_id] = [float(a) for a in alpha]
    latency = (1000.0 * elapsed / max(1, len(dataset))
               if measure_latency else None)
    return rankings, alphas, latency


def evaluate_dataset(dataset: list[TrainingExample], corpus: Corpus,
                     text: TextEncoderModel, local: LocalEncoderModel,
                     glide: GlideModel, router: RouterModel,
                     ks: tuple[int, ...] = (1, 5, 10),
                     measure_latency: bool = False) -> MetricsReport:
    indexes = build_indexes(corpus, text, local, glide,
                            {ex.snapshot_id for ex in dataset})
    rankings, _, latency = rank_dataset(dataset, indexes, text, glide,
                                        router, measure_latency)
    report = compute_metrics(rankings,
                             {ex.query_id: set(ex.positives)
                              for ex in dataset}, ks)
    report.mean_latency_ms = latency
    return report
