"""Figure and delimited-file rendering for evaluation reports.

Every report writes a machine-readable delimited file and a matplotlib
figure next to it. Figures are rendered with the Agg backend so reports
work in headless runs.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .metrics import MetricsReport
from .robustness import RobustnessReport


def write_metrics_report(report: MetricsReport, out_dir,
                         name: str = "eval") -> dict[str, str]:
    """Summary CSV, per-query CSV, and a bar chart of the headline metrics."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{name}_metrics.csv"
    rows = [("mrr", report.mrr), ("map", report.map)]
    rows += [(f"recall@{k}", v) for k, v in sorted(report.recall.items())]
    rows += [(f"hit@{k}", v) for k, v in sorted(report.hit.items())]
    if report.mean_latency_ms is not None:
        rows.append(("mean_latency_ms", report.mean_latency_ms))
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "value"])
        w.writerows(rows)

    pq_path = out / f"{name}_per_query.csv"
    with open(pq_path, "w", newline="") as fh:
        if report.per_query:
            w = csv.DictWriter(fh, fieldnames=list(report.per_query[0]))
            w.writeheader()
            w.writerows(report.per_query)

    fig_path = out / f"{name}_metrics.png"
    labels = [r[0] for r in rows if r[0] != "mean_latency_ms"]
    values = [r[1] for r in rows if r[0] != "mean_latency_ms"]
    fig, ax = plt.subplots(figsize=(max(6, 0.9 * len(labels)), 4))
    ax.bar(labels, values, color="#4878a8")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.set_title("retrieval quality")
    ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    return {"metrics_csv": str(csv_path), "per_query_csv": str(pq_path),
            "figure": str(fig_path)}


def write_robustness_report(report: RobustnessReport, out_dir,
                            name: str = "robustness") -> dict[str, str]:
    """Per-method MRR before/after anonymization: CSV plus a slope chart."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{name}.csv"
    methods = sorted(report.original)
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "mrr_original", "mrr_anonymized", "delta"])
        for m in methods:
            o, a = report.original[m].mrr, report.anonymized[m].mrr
            w.writerow([m, o, a, a - o])

    fig_path = out / f"{name}.png"
    fig, ax = plt.subplots(figsize=(6, 4))
    for m in methods:
        o, a = report.original[m].mrr, report.anonymized[m].mrr
        ax.plot([0, 1], [o, a], marker="o", label=m)
    ax.set_xticks([0, 1], ["original", "anonymized"])
    ax.set_ylabel("MRR")
    ax.set_title("identifier anonymization robustness")
    ax.legend()
    fig.tight_layout()
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    return {"csv": str(csv_path), "figure": str(fig_path)}


def write_bench_report(rows: list[dict], out_dir,
                       name: str = "bench") -> dict[str, str]:
    """Latency and parameter-count table: CSV plus a latency bar chart.

    Each row: {"component", "params", "mean_latency_ms", "p95_latency_ms"}.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{name}.csv"
    fields = ["component", "params", "mean_latency_ms", "p95_latency_ms"]
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)

    fig_path = out / f"{name}.png"
    timed = [r for r in rows if r.get("mean_latency_ms") is not None]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar([r["component"] for r in timed],
           [r["mean_latency_ms"] for r in timed], color="#a85448")
    ax.set_ylabel("mean latency (ms)")
    ax.set_title("query-time latency by component")
    ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    return {"csv": str(csv_path), "figure": str(fig_path)}
