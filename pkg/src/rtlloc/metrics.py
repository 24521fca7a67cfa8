"""Ranking-quality metrics over multi-positive ground truth."""
from __future__ import annotations

from dataclasses import dataclass, field


class EmptyGroundTruth(ValueError):
    pass


def reciprocal_rank(ranking: list[str], relevant: set[str]) -> float:
    if not relevant:
        raise EmptyGroundTruth("query has no ground-truth blocks")
    for i, bid in enumerate(ranking):
        if bid in relevant:
            return 1.0 / (i + 1)
    return 0.0


def average_precision(ranking: list[str], relevant: set[str]) -> float:
    """Untruncated AP: precision at each relevant rank, averaged over |G|."""
    if not relevant:
        raise EmptyGroundTruth("query has no ground-truth blocks")
    hits = 0
    total = 0.0
    for i, bid in enumerate(ranking):
        if bid in relevant:
            hits += 1
            total += hits / (i + 1)
    return total / len(relevant)


def recall_at_k(ranking: list[str], relevant: set[str], k: int) -> float:
    if not relevant:
        raise EmptyGroundTruth("query has no ground-truth blocks")
    return len(set(ranking[:k]) & relevant) / len(relevant)


def hit_at_k(ranking: list[str], relevant: set[str], k: int) -> float:
    if not relevant:
        raise EmptyGroundTruth("query has no ground-truth blocks")
    return 1.0 if set(ranking[:k]) & relevant else 0.0


@dataclass
class MetricsReport:
    mrr: float
    map: float
    recall: dict[int, float]
    hit: dict[int, float]
    per_query: list[dict] = field(default_factory=list)
    mean_latency_ms: float | None = None

    def to_json_dict(self) -> dict:
        d = {
            "mrr": self.mrr,
            "map": self.map,
            "recall": {str(k): v for k, v in sorted(self.recall.items())},
            "hit": {str(k): v for k, v in sorted(self.hit.items())},
            "per_query": self.per_query,
        }
        if self.mean_latency_ms is not None:
            d["mean_latency_ms"] = self.mean_latency_ms
        return d


def compute_metrics(rankings: dict[str, list[str]],
                    ground_truth: dict[str, set[str]],
                    ks: tuple[int, ...] = (1, 5, 10)) -> MetricsReport:
    """Aggregate MRR/MAP/Recall@k/Hit@k over queries, with a per-query table."""
    if not rankings:
        raise EmptyGroundTruth("no queries")
    per_query = []
    for qid in sorted(rankings):
        ranking = rankings[qid]
        rel = ground_truth[qid]
        row = {
            "query_id": qid,
            "rr": reciprocal_rank(ranking, rel),
            "ap": average_precision(ranking, rel),
        }
        for k in ks:
            row[f"recall@{k}"] = recall_at_k(ranking, rel, k)
            row[f"hit@{k}"] = hit_at_k(ranking, rel, k)
        per_query.append(row)
    n = len(per_query)
    return MetricsReport(
        mrr=sum(r["rr"] for r in per_query) / n,
        map=sum(r["ap"] for r in per_query) / n,
        recall={k: sum(r[f"recall@{k}"] for r in per_query) / n for k in ks},
        hit={k: sum(r[f"hit@{k}"] for r in per_query) / n for k in ks},
        per_query=per_query,
    )
