"""Intent-driven change localization for SystemVerilog designs.

Given a natural-language change request and a design snapshot, rank the
design's atomic syntactic blocks by how likely each is to need editing.
Three evidence sources (surface text, block-local dataflow structure,
and design-level topology) are fused by a learned per-query router.
"""
from .blocks import RtlBlock, Snapshot, SourceFile, build_snapshot, \
    segment_blocks
from .config import DEFAULT_SEED, ModelConfig, TrainConfig
from .data import Corpus, TrainingExample
from .dfg import BlockDfg, build_block_dfg
from .dtg import DesignTopologyGraph, build_dtg
from .encoders import (EvidenceVector, GlideModel, LocalEncoderModel,
                       RouterModel, TextEncoderModel)
from .index import SnapshotIndex, build_index, rank
from .metrics import MetricsReport, compute_metrics
from .split import ip_disjoint_split
from .training import TrainingPipeline

__version__ = "0.1.0"

__all__ = [
    "RtlBlock", "Snapshot", "SourceFile", "build_snapshot", "segment_blocks",
    "DEFAULT_SEED", "ModelConfig", "TrainConfig", "Corpus", "TrainingExample",
    "BlockDfg", "build_block_dfg", "DesignTopologyGraph", "build_dtg",
    "EvidenceVector", "GlideModel", "LocalEncoderModel", "RouterModel",
    "TextEncoderModel", "SnapshotIndex", "build_index", "rank",
    "MetricsReport", "compute_metrics", "ip_disjoint_split",
    "TrainingPipeline", "__version__",
]
