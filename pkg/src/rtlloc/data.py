"""Supervision records and the in-memory corpus the trainer runs over."""
from __future__ import annotations

from dataclasses import dataclass, field

from .blocks import Snapshot
from .dfg import BlockDfg, build_block_dfg
from .dtg import DesignTopologyGraph, build_dtg


@dataclass(frozen=True)
class TrainingExample:
    """One change request paired with its ground-truth affected blocks."""
    query_id: str
    text: str
    snapshot_id: str
    ip_name: str
    positives: tuple[str, ...]


@dataclass
class Corpus:
    snapshots: dict[str, Snapshot] = field(default_factory=dict)
    dfgs: dict[str, BlockDfg] = field(default_factory=dict)
    dtgs: dict[str, DesignTopologyGraph] = field(default_factory=dict)
    block_text: dict[str, str] = field(default_factory=dict)
    blocks_by_snapshot: dict[str, list[str]] = field(default_factory=dict)

    @classmethod
    def from_snapshots(cls, snapshots: list[Snapshot],
                       id_vocab: int = 4096) -> "Corpus":
        c = cls()
        for snap in snapshots:
            c.snapshots[snap.snapshot_id] = snap
            ids = []
            for blk in snap.blocks:
                mod = snap.modules.get(blk.module_name)
                decls = mod.decls if mod else None
                c.dfgs[blk.block_id] = build_block_dfg(blk, decls, id_vocab)
                c.block_text[blk.block_id] = blk.text
                ids.append(blk.block_id)
            c.blocks_by_snapshot[snap.snapshot_id] = ids
            c.dtgs[snap.snapshot_id] = build_dtg(snap)
        return c


def snapshots_from_dir(src) -> list[Snapshot]:
    """One snapshot per immediate subdirectory of `src`.

    The subdirectory name becomes both the snapshot id and, because file
    paths stay relative to `src`, the IP name of every block inside it.
    """
    from pathlib import Path

    from .blocks import SourceFile, build_snapshot, is_testbench_or_generated
    root = Path(src)
    snaps = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        files = []
        for f in sorted(sub.rglob("*")):
            if f.suffix not in (".sv", ".svh") or not f.is_file():
                continue
            content = f.read_text()
            rel = str(f.relative_to(root))
            if is_testbench_or_generated(rel, content):
                continue
            files.append(SourceFile(path=rel, content=content))
        if files:
            snaps.append(build_snapshot(sub.name, files))
    return snaps


def save_examples(dataset: list[TrainingExample], path) -> None:
    import json
    with open(path, "w") as fh:
        for ex in dataset:
            fh.write(json.dumps({
                "query_id": ex.query_id, "text": ex.text,
                "snapshot_id": ex.snapshot_id, "ip_name": ex.ip_name,
                "positives": list(ex.positives)}) + "\n")


def load_examples(path) -> list[TrainingExample]:
    import json
    out = []
    with open(path) as fh:
        for line in fh:
            d = json.loads(line)
            out.append(TrainingExample(
                query_id=d["query_id"], text=d["text"],
                snapshot_id=d["snapshot_id"], ip_name=d["ip_name"],
                positives=tuple(d["positives"])))
    return out


def query_pairs(dataset: list[TrainingExample]) -> list[tuple[TrainingExample, str]]:
    """Flatten (example, positive block id) pairs in deterministic order."""
    pairs = []
    for ex in dataset:
        for bid in ex.positives:
            pairs.append((ex, bid))
    return pairs
