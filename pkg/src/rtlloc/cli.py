"""Command-line entry point.

Every subcommand is a thin adapter over the library: machine-readable
JSON/JSONL goes to stdout or --out, human-oriented tables go to stderr.
Exit codes: 0 success, 1 domain error, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .anonymize import anonymize_text
from .blocks import SourceFile, build_snapshot, segment_blocks
from .config import DEFAULT_SEED, TrainConfig
from .data import (Corpus, load_examples, snapshots_from_dir)
from .dfg import build_block_dfg
from .dtg import build_dtg
from .evaluate import evaluate_dataset
from .index import SnapshotIndex, build_index, rank
from .mine import (FallbackExtractor, RemoteExtractor, emit_dataset,
                   mine_repository)
from .robustness import evaluate_robustness
from .split import ip_disjoint_split
from .training import STAGE_ORDER, TrainingPipeline


class UsageError(ValueError):
    pass


def _emit(obj, out: str | None, jsonl: bool = False):
    if jsonl:
        text = "\n".join(json.dumps(rec) for rec in obj) + "\n"
    else:
        text = json.dumps(obj, indent=1, sort_keys=True) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _log(msg: str):
    print(msg, file=sys.stderr)


def _read_source(path: str) -> SourceFile:
    return SourceFile(path=path, content=Path(path).read_text())


def _load_config(args) -> TrainConfig:
    cfg = TrainConfig.load(args.config) if args.config else TrainConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _load_models(model_dir: str, cfg: TrainConfig):
    pipeline = TrainingPipeline(Corpus(), [], cfg, model_dir)
    return pipeline.load_all()


def _load_corpus(src: str) -> Corpus:
    snaps = snapshots_from_dir(src)
    if not snaps:
        raise UsageError(f"no design files found under {src!r}")
    return Corpus.from_snapshots(snaps)


# ------------------------------------------------------------- subcommands

def cmd_blocks(args) -> int:
    blocks = segment_blocks(_read_source(args.infile))
    _emit([b.to_json_dict() for b in blocks], args.out, jsonl=True)
    _log(f"{len(blocks)} blocks in {args.infile}")
    return 0


def cmd_dfg(args) -> int:
    src = _read_source(args.infile)
    snap = build_snapshot("cli", [src])
    records = []
    for i, blk in enumerate(snap.blocks):
        if args.block_index is not None and i != args.block_index:
            continue
        mod = snap.modules.get(blk.module_name)
        dfg = build_block_dfg(blk, mod.decls if mod else None)
        records.append(dfg.to_json_dict())
    _emit(records, args.out, jsonl=True)
    return 0


def cmd_dtg(args) -> int:
    corpus = _load_corpus(args.src)
    records = []
    for sid in sorted(corpus.dtgs):
        dtg = corpus.dtgs[sid]
        records.append({"snapshot_id": sid, "stats": dtg.stats(),
                        "edges": [e.to_json_dict() for e in dtg.edges]})
        _log(f"{sid}: {dtg.stats()}")
    _emit(records, args.out, jsonl=True)
    return 0


def cmd_anonymize(args) -> int:
    rewritten = anonymize_text(Path(args.infile).read_text())
    if args.out:
        Path(args.out).write_text(rewritten)
    else:
        sys.stdout.write(rewritten)
    return 0


def cmd_mine(args) -> int:
    if args.extractor == "remote":
        if not args.endpoint:
            raise UsageError("--extractor remote requires --endpoint")
        extractor = RemoteExtractor(args.endpoint)
    else:
        extractor = FallbackExtractor()
    result = mine_repository(args.repo, extractor,
                             min_confidence=args.min_confidence)
    paths = emit_dataset(result.instances, args.out)
    _log(f"accepted {len(result.instances)} commits, "
         f"rejected {len(result.rejections)}")
    for rej in result.rejections:
        _log(f"  reject {rej.commit_id[:12]}: {rej.reason}")
    _emit({"accepted": len(result.instances),
           "rejected": [{"commit_id": r.commit_id, "reason": r.reason}
                        for r in result.rejections],
           "files": paths}, None)
    return 0


def cmd_split(args) -> int:
    dataset = load_examples(args.dataset)
    split = ip_disjoint_split(dataset, seed=args.seed)
    _emit({name: sorted({ex.ip_name for ex in part})
           for name, part in zip(("train", "val", "test"), split)}, args.out)
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    if args.dump_config:
        _emit(cfg.to_json_dict(), None)
        return 0
    corpus = _load_corpus(args.src)
    dataset = load_examples(args.dataset)
    pipeline = TrainingPipeline(corpus, dataset, cfg, args.out)
    stages = STAGE_ORDER if args.stage == "all" else (args.stage,)
    for stage in stages:
        t0 = time.perf_counter()
        losses = pipeline.run_stage(stage)
        _log(f"stage {stage}: {len(losses)} steps, "
             f"final loss {losses[-1]:.4f}, "
             f"{time.perf_counter() - t0:.1f}s")
    return 0


def cmd_index(args) -> int:
    cfg = _load_config(args)
    corpus = _load_corpus(args.src)
    models = _load_models(args.models, cfg)
    if args.snapshot_id not in corpus.snapshots:
        raise UsageError(f"unknown snapshot {args.snapshot_id!r}; "
                         f"have {sorted(corpus.snapshots)}")
    index = build_index(args.snapshot_id, corpus, models["text"],
                        models["local"], models["glide"])
    index.save(args.out)
    _log(f"indexed {len(index.block_ids)} blocks "
         f"in {index.build_seconds:.2f}s -> {args.out}")
    return 0


def cmd_query(args) -> int:
    cfg = _load_config(args)
    models = _load_models(args.models, cfg)
    index = SnapshotIndex.load(args.index)
    result = rank(args.q, index, models["text"], models["glide"],
                  models["router"])
    top = result.items[:args.k]
    _emit({"query": args.q,
           "alpha": [float(a) for a in result.alpha],
           "results": [{"block_id": bid, "score": score,
                        "evidence": {"text": ev.s_txt, "local": ev.s_loc,
                                     "global": ev.s_glob}}
                       for bid, score, ev in top]}, args.out)
    _log(f"alpha = {np.round(result.alpha, 3).tolist()}")
    _log(f"{'rank':>4}  {'score':>8}  {'s_txt':>7} {'s_loc':>7} "
         f"{'s_glob':>7}  block")
    for i, (bid, score, ev) in enumerate(top):
        _log(f"{i + 1:>4}  {score:>8.4f}  {ev.s_txt:>7.3f} {ev.s_loc:>7.3f} "
             f"{ev.s_glob:>7.3f}  {bid}")
    return 0


def cmd_eval(args) -> int:
    from .report import write_metrics_report, write_robustness_report
    cfg = _load_config(args)
    corpus = _load_corpus(args.src)
    dataset = load_examples(args.dataset)
    models = _load_models(args.models, cfg)
    outputs = {}
    if args.masked:
        rob = evaluate_robustness(dataset, corpus, models["text"],
                                  models["local"], models["glide"],
                                  models["router"])
        outputs["report"] = rob.to_json_dict()
        if args.out_dir:
            outputs["files"] = write_robustness_report(rob, args.out_dir)
        for m, delta in rob.deltas().items():
            _log(f"{m}: mrr {rob.original[m].mrr:.3f} -> "
                 f"{rob.anonymized[m].mrr:.3f} (delta {delta:+.3f})")
    else:
        reports = []
        seeds = args.seeds or [cfg.seed]
        for seed in seeds:
            report = evaluate_dataset(dataset, corpus, models["text"],
                                      models["local"], models["glide"],
                                      models["router"],
                                      measure_latency=args.latency)
            reports.append(report)
            _log(f"seed {seed}: mrr {report.mrr:.4f} map {report.map:.4f}")
        outputs["report"] = reports[0].to_json_dict()
        if len(reports) > 1:
            outputs["mrr_by_seed"] = [r.mrr for r in reports]
        if args.out_dir:
            outputs["files"] = write_metrics_report(reports[0], args.out_dir)
    _emit(outputs, args.out)
    return 0


def cmd_bench(args) -> int:
    from .report import write_bench_report
    cfg = _load_config(args)
    models = _load_models(args.models, cfg)
    rng = np.random.default_rng(cfg.seed)
    n = args.candidates

    def unit_rows(k, d):
        m = rng.standard_normal((k, d))
        return m / np.linalg.norm(m, axis=1, keepdims=True)

    index = SnapshotIndex("bench", [f"b{i:05d}" for i in range(n)],
                          unit_rows(n, cfg.model.text_dim),
                          unit_rows(n, cfg.model.text_dim),
                          unit_rows(n, cfg.model.glide_proj_dim))
    from .index import score_query
    query = "adjust the handshake condition for the response channel"
    times = []
    for _ in range(args.queries):
        t0 = time.perf_counter()
        score_query(query, index, models["text"], models["glide"],
                    models["router"])
        times.append(1000.0 * (time.perf_counter() - t0))
    times = np.array(times)
    rows = [{"component": name, "params": models[name].num_params(),
             "mean_latency_ms": None, "p95_latency_ms": None}
            for name in STAGE_ORDER]
    rows.append({"component": "fused_query",
                 "params": sum(models[s].num_params() for s in STAGE_ORDER),
                 "mean_latency_ms": float(times.mean()),
                 "p95_latency_ms": float(np.percentile(times, 95))})
    outputs = {"candidates": n, "queries": args.queries, "rows": rows}
    if args.out_dir:
        outputs["files"] = write_bench_report(rows, args.out_dir)
    _emit(outputs, args.out)
    _log(f"fused scoring over {n} candidates: mean {times.mean():.2f} ms, "
         f"p95 {np.percentile(times, 95):.2f} ms")
    return 0


# ---------------------------------------------------------------- parsing

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rtlloc",
        description="Intent-driven change localization for SystemVerilog.")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common_model_flags(sp):
        sp.add_argument("--config", help="JSON training/model config file")
        sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("blocks", help="segment a file into atomic blocks")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_blocks)

    sp = sub.add_parser("dfg", help="block-local dataflow graphs")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--block-index", type=int, default=None)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_dfg)

    sp = sub.add_parser("dtg", help="design topology graph per snapshot")
    sp.add_argument("--src", required=True,
                    help="directory of snapshot subdirectories")
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_dtg)

    sp = sub.add_parser("anonymize", help="rewrite identifiers to VAR_<i>")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_anonymize)

    sp = sub.add_parser("mine", help="mine git history into supervision")
    sp.add_argument("--repo", required=True)
    sp.add_argument("--extractor", choices=("remote", "fallback"),
                    default="fallback")
    sp.add_argument("--endpoint")
    sp.add_argument("--min-confidence", type=float, default=0.6)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(fn=cmd_mine)

    sp = sub.add_parser("split", help="IP-disjoint train/val/test split")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_split)

    sp = sub.add_parser("train", help="run the staged training schedule")
    sp.add_argument("--src", required=True)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--out", required=True, help="checkpoint directory")
    sp.add_argument("--stage", choices=STAGE_ORDER + ("all",), default="all")
    sp.add_argument("--dump-config", action="store_true")
    common_model_flags(sp)
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("index", help="embed one snapshot for retrieval")
    sp.add_argument("--src", required=True)
    sp.add_argument("--snapshot-id", required=True)
    sp.add_argument("--models", required=True)
    sp.add_argument("--out", required=True)
    common_model_flags(sp)
    sp.set_defaults(fn=cmd_index)

    sp = sub.add_parser("query", help="rank blocks for a change request")
    sp.add_argument("--index", required=True)
    sp.add_argument("--models", required=True)
    sp.add_argument("--q", required=True)
    sp.add_argument("-k", type=int, default=10)
    sp.add_argument("--out")
    common_model_flags(sp)
    sp.set_defaults(fn=cmd_query)

    sp = sub.add_parser("eval", help="metrics over a labelled dataset")
    sp.add_argument("--src", required=True)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--models", required=True)
    sp.add_argument("--masked", action="store_true",
                    help="paired original/anonymized comparison")
    sp.add_argument("--seeds", type=int, nargs="+")
    sp.add_argument("--latency", action="store_true")
    sp.add_argument("--out")
    sp.add_argument("--out-dir", help="write figures and CSV files here")
    common_model_flags(sp)
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("bench", help="latency and parameter counts")
    sp.add_argument("--models", required=True)
    sp.add_argument("--candidates", type=int, default=10000)
    sp.add_argument("--queries", type=int, default=20)
    sp.add_argument("--out")
    sp.add_argument("--out-dir")
    common_model_flags(sp)
    sp.set_defaults(fn=cmd_bench)
    return p


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except UsageError as exc:
        _log(f"usage error: {exc}")
        return 2
    except (ValueError, KeyError, RuntimeError, OSError) as exc:
        _log(f"error: {type(exc).__name__}: {exc}")
        return 1


def main():
    sys.exit(dispatch())
