"""Model and training configuration with desk-scale defaults."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

DEFAULT_SEED = 36


@dataclass
class ModelConfig:
    # shared embedding space
    text_dim: int = 384
    # text encoder
    text_vocab: int = 2048
    tau_text: float = 0.05
    # identifier hashing / local DFG encoder
    id_vocab: int = 4096
    w_max: int = 256
    local_id_dim: int = 64
    local_cat_dim: int = 16
    local_op_dim: int = 16
    local_width_dim: int = 16
    local_hidden: int = 128
    local_layers: int = 3
    local_edge_dim: int = 16  # role + timing halves
    tau_local: float = 0.07
    # GLIDE
    glide_hidden: int = 256
    glide_layers: int = 2
    glide_edge_dim: int = 32
    glide_proj_dim: int = 128
    tau_glob: float = 0.07
    # router
    router_hidden: int = 128
    dropout: float = 0.3
    # evidence rescaling (off by default: raw cosines are already bounded)
    evidence_minmax_rescale: bool = False


@dataclass
class StageConfig:
    lr: float
    batch_size: int
    epochs: int
    warmup_frac: float
    negatives: int


@dataclass
class TrainConfig:
    seed: int = DEFAULT_SEED
    gamma: float = 0.5
    dropout: float = 0.3
    text: StageConfig = field(default_factory=lambda: StageConfig(
        lr=2e-5, batch_size=32, epochs=5, warmup_frac=0.1, negatives=0))
    local: StageConfig = field(default_factory=lambda: StageConfig(
        lr=5e-4, batch_size=8, epochs=30, warmup_frac=0.1, negatives=15))
    glide: StageConfig = field(default_factory=lambda: StageConfig(
        lr=5e-4, batch_size=4, epochs=30, warmup_frac=0.1, negatives=31))
    router: StageConfig = field(default_factory=lambda: StageConfig(
        lr=1e-3, batch_size=16, epochs=30, warmup_frac=0.1, negatives=8))
    model: ModelConfig = field(default_factory=ModelConfig)

    def to_json_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(d)
        for key in ("text", "local", "glide", "router"):
            if key in kw and isinstance(kw[key], dict):
                kw[key] = StageConfig(**kw[key])
        if "model" in kw and isinstance(kw["model"], dict):
            kw["model"] = ModelConfig(**kw["model"])
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "TrainConfig":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def desk_scale_config(seed: int = DEFAULT_SEED) -> TrainConfig:
    """Schedule sized for the bundled synthetic corpus on a laptop CPU.

    Keeps the architecture and loss settings of the defaults but shortens
    the epoch budget so a full 4-stage run finishes in well under ten
    minutes. The text stage uses a larger learning rate because the
    from-scratch hashing encoder starts from random projections rather
    than a pretrained initialization.
    """
    cfg = TrainConfig(seed=seed)
    cfg.text = StageConfig(lr=1e-3, batch_size=32, epochs=5,
                           warmup_frac=0.1, negatives=0)
    cfg.local = StageConfig(lr=5e-4, batch_size=8, epochs=3,
                            warmup_frac=0.1, negatives=15)
    cfg.glide = StageConfig(lr=5e-4, batch_size=4, epochs=3,
                            warmup_frac=0.1, negatives=15)
    cfg.router = StageConfig(lr=2e-3, batch_size=16, epochs=20,
                             warmup_frac=0.1, negatives=8)
    return cfg
