"""Commit scanning, line diffs, and hunk-to-block mapping.

Git access goes through the git executable; nothing here re-implements
object storage. History is walked first-parent so merge commits
contribute exactly their mainline diff.
"""
from __future__ import annotations

import difflib
import re
import subprocess
from dataclasses import dataclass, field

from ..blocks import RtlBlock, Snapshot, is_testbench_or_generated
from ..bm25 import tokenize_identifier_aware


class RepoAccessError(RuntimeError):
    pass


class UnmappedHunk(ValueError):
    """A diff hunk that falls outside every atomic block."""


@dataclass(frozen=True)
class CommitRecord:
    commit_id: str
    parent_id: str  # empty for a root commit
    message: str    # scrubbed of author metadata
    design_files: tuple[str, ...]


@dataclass(frozen=True)
class DiffHunk:
    path: str
    old_start: int  # 1-based first line in the old file, 0 if pure insert
    old_count: int
    new_start: int
    new_count: int


@dataclass
class ChangeInstance:
    delta_spec: "DeltaSpec"
    affected_block_ids: list[str]
    commit_id: str
    ip_name: str


_SIGNOFF_RE = re.compile(
    r"^\s*(signed-off-by|reviewed-by|acked-by|co-authored-by|tested-by|"
    r"reported-by|suggested-by|cc)\s*:.*$", re.IGNORECASE | re.MULTILINE)
_EMAIL_RE = re.compile(r"<?[\w.+-]+@[\w-]+\.[\w.-]+>?")
_MENTION_RE = re.compile(r"(?<![\w.])@[\w-]+")


def scrub_message(message: str) -> str:
    """Drop sign-off trailer lines, email addresses and @-mentions."""
    out = _SIGNOFF_RE.sub("", message)
    out = _EMAIL_RE.sub("", out)
    out = _MENTION_RE.sub("", out)
    lines = [ln.rstrip() for ln in out.splitlines()]
    while lines and not lines[-1]:
        lines.pop()
    return "\n".join(ln for i, ln in enumerate(lines)
                     if ln or (0 < i < len(lines) - 1))


def _git(repo: str, *args: str) -> str:
    proc = subprocess.run(["git", "-C", repo, *args],
                          capture_output=True, text=True)
    if proc.returncode != 0:
        raise RepoAccessError(
            f"git {' '.join(args)} failed: {proc.stderr.strip()}")
    return proc.stdout


def file_at_revision(repo: str, rev: str, path: str) -> str:
    """File content at a revision; empty string if absent there."""
    proc = subprocess.run(["git", "-C", repo, "show", f"{rev}:{path}"],
                          capture_output=True, text=True)
    return proc.stdout if proc.returncode == 0 else ""


def _is_design_file(repo: str, commit: str, parent: str, path: str) -> bool:
    if not (path.endswith(".sv") or path.endswith(".svh")):
        return False
    content = file_at_revision(repo, commit, path) or \
        (file_at_revision(repo, parent, path) if parent else "")
    return not is_testbench_or_generated(path, content)


def list_commits(repo: str) -> list[tuple[str, str]]:
    """(commit, first parent) pairs, oldest first for stable output order."""
    raw = _git(repo, "log", "--first-parent", "--reverse",
               "--format=%H %P").strip()
    out = []
    for line in raw.splitlines():
        parts = line.split()
        out.append((parts[0], parts[1] if len(parts) > 1 else ""))
    return out


def commit_record(repo: str, commit: str, parent: str) -> CommitRecord | None:
    """The commit as a mining candidate, or None if it touches no
    eligible design file (testbench-only and non-RTL commits)."""
    if parent:
        touched = _git(repo, "diff", "--name-only", parent, commit)
    else:
        touched = _git(repo, "show", "--format=", "--name-only", commit)
    design = tuple(sorted(
        p for p in touched.split("\n")
        if p and _is_design_file(repo, commit, parent, p)))
    if not design:
        return None
    message = scrub_message(_git(repo, "log", "-1", "--format=%B", commit))
    return CommitRecord(commit, parent, message, design)


def scan_history(repo: str) -> list[CommitRecord]:
    """First-parent commits touching at least one eligible design file."""
    records = []
    for commit, parent in list_commits(repo):
        rec = commit_record(repo, commit, parent)
        if rec is not None:
            records.append(rec)
    return records


def compute_hunks(path: str, old: str, new: str) -> list[DiffHunk]:
    """Line-level hunks between two file versions, via a minimal edit script.

    Contiguous runs of non-equal opcodes collapse into one hunk. Ranges
    are 1-based inclusive starts with counts; a count of 0 marks a pure
    insertion or deletion anchored at the preceding line.
    """
    a, b = old.splitlines(), new.splitlines()
    sm = difflib.SequenceMatcher(a=a, b=b, autojunk=False)
    hunks: list[DiffHunk] = []
    run: list[tuple[int, int, int, int]] = []
    for tag, i1, i2, j1, j2 in sm.get_opcodes():
        if tag == "equal":
            if run:
                hunks.append(_close_run(path, run))
                run = []
        else:
            run.append((i1, i2, j1, j2))
    if run:
        hunks.append(_close_run(path, run))
    return hunks


def _close_run(path: str, run: list[tuple[int, int, int, int]]) -> DiffHunk:
    i1, j1 = run[0][0], run[0][2]
    i2, j2 = run[-1][1], run[-1][3]
    return DiffHunk(path=path,
                    old_start=i1 + 1 if i2 > i1 else 0, old_count=i2 - i1,
                    new_start=j1 + 1 if j2 > j1 else 0, new_count=j2 - j1)


def _blocks_covering(blocks: list[RtlBlock], path: str, start: int,
                     count: int) -> list[RtlBlock]:
    if count == 0:
        return []
    lo, hi = start, start + count - 1
    return [b for b in blocks
            if b.path == path and b.span[0] <= hi and b.span[1] >= lo]


def _ordinal_key(block: RtlBlock) -> tuple[str, str, str, str]:
    path, module, kind, ordinal = block.block_id.rsplit("::", 3)
    return path, module, kind, ordinal


def _token_overlap(a: str, b: str) -> float:
    ta, tb = set(tokenize_identifier_aware(a)), set(tokenize_identifier_aware(b))
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / max(len(ta), len(tb))


def resolve_pre_block(pre_block: RtlBlock, post: Snapshot) -> str:
    """Post-revision id for a pre-revision block, if a counterpart exists.

    Primary identity is (module, kind, ordinal) in the same file; when the
    ordinal slot vanished (blocks reordered or deleted), fall back to the
    best token-overlap match of the same kind at >= 0.6 similarity.
    Deleted blocks keep their pre-revision id.
    """
    key = _ordinal_key(pre_block)
    best_fallback, best_sim = None, 0.0
    for cand in post.blocks:
        if _ordinal_key(cand) == key:
            return cand.block_id
        if cand.path == pre_block.path and cand.kind == pre_block.kind:
            sim = _token_overlap(pre_block.text, cand.text)
            if sim > best_sim:
                best_fallback, best_sim = cand.block_id, sim
    if best_fallback is not None and best_sim >= 0.6:
        return best_fallback
    return pre_block.block_id


def map_hunks_to_blocks(hunks: list[DiffHunk], pre: Snapshot,
                        post: Snapshot) -> list[str]:
    """Affected block ids, normalized to the post-revision snapshot."""
    ids: set[str] = set()
    for h in hunks:
        pre_hits = _blocks_covering(pre.blocks, h.path, h.old_start,
                                    h.old_count)
        post_hits = _blocks_covering(post.blocks, h.path, h.new_start,
                                     h.new_count)
        if not pre_hits and not post_hits:
            raise UnmappedHunk(
                f"{h.path}: lines -{h.old_start},{h.old_count} "
                f"+{h.new_start},{h.new_count} touch no block")
        ids.update(b.block_id for b in post_hits)
        ids.update(resolve_pre_block(b, post) for b in pre_hits)
    return sorted(ids)
