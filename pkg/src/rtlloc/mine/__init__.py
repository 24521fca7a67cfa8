"""History mining: turn a git repository into change-localization supervision."""
from .core import (ChangeInstance, CommitRecord, DiffHunk, RepoAccessError,
                   UnmappedHunk, commit_record, compute_hunks, list_commits,
                   map_hunks_to_blocks, scan_history, scrub_message)
from .extract import (EXTRACTION_PROMPT, DeltaSpec, FallbackExtractor,
                      MalformedOutput, RemoteExtractor, RemoteUnavailable,
                      extract_delta_spec)
from .pipeline import (MineResult, Rejection, emit_dataset, load_dataset,
                       mine_commit, mine_repository)
from .qc import QcResult, qc_filter

__all__ = [
    "ChangeInstance", "CommitRecord", "DiffHunk", "RepoAccessError",
    "UnmappedHunk", "commit_record", "compute_hunks", "list_commits",
    "map_hunks_to_blocks", "scan_history", "scrub_message", "EXTRACTION_PROMPT", "DeltaSpec", "FallbackExtractor",
    "MalformedOutput", "RemoteExtractor", "RemoteUnavailable",
    "extract_delta_spec", "MineResult", "Rejection", "emit_dataset",
    "load_dataset", "mine_commit", "mine_repository", "QcResult", "qc_filter",
]
