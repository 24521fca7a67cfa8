"""End-to-end mining: history scan, diff, mapping, extraction, QC, output."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..blocks import SourceFile, build_snapshot
from .core import (ChangeInstance, CommitRecord, UnmappedHunk, commit_record,
                   compute_hunks, file_at_revision, list_commits,
                   map_hunks_to_blocks)
from .extract import (DeltaSpec, FallbackExtractor, MalformedOutput,
                      extract_delta_spec)
from .qc import QcResult, qc_filter

DATASET_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Rejection:
    commit_id: str
    reason: str


@dataclass
class MineResult:
    instances: list[ChangeInstance]
    rejections: list[Rejection]


def _snapshot_at(repo: str, rev: str, paths: tuple[str, ...], label: str):
    files = []
    for p in paths:
        content = file_at_revision(repo, rev, p) if rev else ""
        if content:
            files.append(SourceFile(path=p, content=content))
    return build_snapshot(label, files)


def mine_commit(repo: str, record: CommitRecord, extractor) -> ChangeInstance:
    """One commit to one (intent, block-set) instance. Raises on QC input
    failures that any later rule cannot see (unmapped hunks, bad JSON)."""
    delta = extract_delta_spec(record.message, extractor)
    pre = _snapshot_at(repo, record.parent_id, record.design_files, "pre")
    post = _snapshot_at(repo, record.commit_id, record.design_files, "post")
    hunks = []
    for path in record.design_files:
        old = file_at_revision(repo, record.parent_id, path) \
            if record.parent_id else ""
        new = file_at_revision(repo, record.commit_id, path)
        hunks.extend(compute_hunks(path, old, new))
    blocks = map_hunks_to_blocks(hunks, pre, post)
    ip = record.design_files[0].replace("\\", "/").lstrip("/").split("/")[0]
    return ChangeInstance(delta_spec=delta, affected_block_ids=blocks,
                          commit_id=record.commit_id, ip_name=ip)


def mine_repository(repo: str, extractor=None, min_confidence: float = 0.6,
                    max_blocks: int = 25) -> MineResult:
    extractor = extractor or FallbackExtractor()
    instances: list[ChangeInstance] = []
    rejections: list[Rejection] = []
    for commit, parent in list_commits(repo):
        record = commit_record(repo, commit, parent)
        if record is None:
            rejections.append(Rejection(commit, "no_design_files"))
            continue
        try:
            inst = mine_commit(repo, record, extractor)
        except UnmappedHunk:
            rejections.append(Rejection(record.commit_id, "unmapped_hunk"))
            continue
        except MalformedOutput:
            rejections.append(Rejection(record.commit_id, "malformed_output"))
            continue
        verdict = qc_filter(inst, record.message,
                            min_confidence=min_confidence,
                            max_blocks=max_blocks)
        if verdict.accepted:
            instances.append(verdict.instance)
        else:
            rejections.append(Rejection(record.commit_id, verdict.reason))
    return MineResult(instances, rejections)


def emit_dataset(instances: list[ChangeInstance], out_dir) -> dict[str, str]:
    """Write instance-level and flattened pair-level JSONL files.

    Field order is fixed so reruns over the same repository are
    byte-identical. Pair lines = sum of per-instance block-set sizes.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    inst_path = out / "instances.jsonl"
    pair_path = out / "pairs.jsonl"
    with open(inst_path, "w") as fi, open(pair_path, "w") as fp:
        for inst in instances:
            base = {
                "schema_version": DATASET_SCHEMA_VERSION,
                "commit_id": inst.commit_id,
                "ip_name": inst.ip_name,
                "delta_spec": inst.delta_spec.to_json_dict(),
            }
            fi.write(json.dumps(
                {**base, "affected_block_ids": inst.affected_block_ids}) + "\n")
            for bid in inst.affected_block_ids:
                fp.write(json.dumps({**base, "block_id": bid}) + "\n")
    return {"instances": str(inst_path), "pairs": str(pair_path)}


def load_dataset(path) -> list[ChangeInstance]:
    out = []
    with open(path) as fh:
        for line in fh:
            d = json.loads(line)
            out.append(ChangeInstance(
                delta_spec=DeltaSpec.from_json_dict(d["delta_spec"]),
                affected_block_ids=list(d["affected_block_ids"]),
                commit_id=d["commit_id"], ip_name=d["ip_name"]))
    return out
