"""Staged training: text encoder, local encoder, GLIDE, then the router.

Each stage freezes everything trained before it; checkpoints land in a
directory as stage{1..4}.ckpt plus a manifest, and identical config+seed
reproduces them byte for byte.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig
from .data import Corpus, TrainingExample, query_pairs
from .encoders import (GlideModel, LocalEncoderModel, RouterModel,
                       TextEncoderModel)
from .losses import (loss_infonce_listwise, loss_margin_rank, loss_mnrl)
from .optim import AdamW, linear_warmup_lr
from .tensor import Tensor, concat, gather_rows, matmul, reshape, tmean, tsum


class MissingCheckpoint(FileNotFoundError):
    pass


class BatchConstraintUnsatisfiable(RuntimeError):
    pass


class InsufficientNegatives(RuntimeError):
    pass


STAGE_FILES = {"text": "stage1.ckpt", "local": "stage2.ckpt",
               "glide": "stage3.ckpt", "router": "stage4.ckpt"}
STAGE_ORDER = ("text", "local", "glide", "router")


def _stage_rng(seed: int, stage: str, stream: str) -> np.random.Generator:
    from .dfg import hash_identifier
    return np.random.default_rng(
        [seed, STAGE_ORDER.index(stage), hash_identifier(stream, 1 << 16)])


def constrained_batches(pairs: list, batch_size: int,
                        rng: np.random.Generator) -> list[list]:
    """Batches with at most one positive per distinct query.

    Every pair appears exactly once; pairs whose query already occurs in the
    open batch are deferred to later batches.
    """
    if batch_size < 1:
        raise BatchConstraintUnsatisfiable("batch size must be >= 1")
    remaining = list(pairs)
    order = rng.permutation(len(remaining))
    remaining = [remaining[i] for i in order]
    batches: list[list] = []
    while remaining:
        batch, seen, deferred = [], set(), []
        for item in remaining:
            qid = item[0].query_id
            if qid in seen or len(batch) >= batch_size:
                deferred.append(item)
            else:
                batch.append(item)
                seen.add(qid)
        batches.append(batch)
        remaining = deferred
    return batches


# ------------------------------------------------------------------ stages

def train_text(dataset: list[TrainingExample], corpus: Corpus,
               config: TrainConfig,
               model: TextEncoderModel | None = None) -> tuple[TextEncoderModel, list[float]]:
    cfg = config.text
    rng = _stage_rng(config.seed, "text", "init")
    if model is None:
        model = TextEncoderModel(config.model, rng)
    sampler_rng = _stage_rng(config.seed, "text", "sampler")
    pairs = query_pairs(dataset)
    opt = AdamW(model.trainable(), lr=cfg.lr)
    epoch_batches = constrained_batches(pairs, cfg.batch_size, sampler_rng)
    total_steps = cfg.epochs * max(1, len(epoch_batches))
    losses: list[float] = []
    step = 0
    for epoch in range(cfg.epochs):
        batches = (epoch_batches if epoch == 0 else
                   constrained_batches(pairs, cfg.batch_size, sampler_rng))
        for batch in batches:
            q = model.encode_batch([ex.text for ex, _ in batch])
            b = model.encode_batch([corpus.block_text[bid] for _, bid in batch])
            sim = matmul(q, _transpose(b))
            loss = loss_mnrl(sim, config.model.tau_text)
            opt.zero_grad()
            loss.backward()
            opt.step(linear_warmup_lr(step, total_steps, cfg.lr, cfg.warmup_frac))
            losses.append(loss.item())
            step += 1
    return model, losses


def _transpose(t: Tensor) -> Tensor:
    from .tensor import _make
    data = t.data.T

    def backward(g):
        t._accum(g.T)
    return _make(data, (t,), backward)


def _sample_negatives(corpus: Corpus, ex: TrainingExample, count: int,
                      rng: np.random.Generator) -> list[str]:
    """Uniform same-snapshot negatives outside the positive set."""
    candidates = [bid for bid in corpus.blocks_by_snapshot[ex.snapshot_id]
                  if bid not in ex.positives]
    if not candidates:
        raise InsufficientNegatives(
            f"snapshot {ex.snapshot_id!r} has no non-positive blocks")
    if len(candidates) <= count:
        return list(candidates)
    idx = rng.choice(len(candidates), size=count, replace=False)
    return [candidates[i] for i in sorted(idx)]


def _freeze_text_vectors(model: TextEncoderModel, texts: list[str]) -> np.ndarray:
    return model.encode_batch(texts).data.copy()


def train_local(dataset: list[TrainingExample], frozen_text: TextEncoderModel,
                corpus: Corpus, config: TrainConfig,
                model: LocalEncoderModel | None = None) -> tuple[LocalEncoderModel, list[float]]:
    cfg = config.local
    frozen_text.set_frozen(True)
    init_rng = _stage_rng(config.seed, "local", "init")
    if model is None:
        model = LocalEncoderModel(config.model, init_rng)
    sample_rng = _stage_rng(config.seed, "local", "negatives")
    drop_rng = _stage_rng(config.seed, "local", "dropout")
    pairs = query_pairs(dataset)
    qvecs = {ex.query_id: v for (ex, v) in zip(
        [p[0] for p in pairs],
        _freeze_text_vectors(frozen_text, [p[0].text for p in pairs]))}
    opt = AdamW(model.trainable(), lr=cfg.lr)
    steps_per_epoch = max(1, (len(pairs) + cfg.batch_size - 1) // cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch
    losses: list[float] = []
    step = 0
    for _ in range(cfg.epochs):
        order = sample_rng.permutation(len(pairs))
        for start in range(0, len(order), cfg.batch_size):
            chunk = [pairs[i] for i in order[start:start + cfg.batch_size]]
            dfgs, groups = [], []
            for ex, pos_bid in chunk:
                negs = _sample_negatives(corpus, ex, cfg.negatives, sample_rng)
                base = len(dfgs)
                dfgs.extend(corpus.dfgs[b] for b in [pos_bid] + negs)
                groups.append((ex, base, 1 + len(negs)))
            H = model.encode_batch(dfgs, train=True, rng=drop_rng)
            terms = []
            for ex, base, size in groups:
                q = Tensor(qvecs[ex.query_id])
                sims = matmul(gather_rows(H, np.arange(base, base + size)), q)
                pos_sim = tsum(gather_rows(reshape(sims, (-1, 1)), [0]))
                neg_sims = reshape(gather_rows(reshape(sims, (-1, 1)),
                                               np.arange(1, size)), (-1,))
                terms.append(reshape(loss_infonce_listwise(
                    pos_sim, neg_sims, config.model.tau_local), (1,)))
            loss = tmean(concat(terms, axis=0))
            opt.zero_grad()
            loss.backward()
            opt.step(linear_warmup_lr(step, total_steps, cfg.lr, cfg.warmup_frac))
            losses.append(loss.item())
            step += 1
    return model, losses


def train_glide(dataset: list[TrainingExample], frozen_text: TextEncoderModel,
                frozen_local: LocalEncoderModel, corpus: Corpus,
                config: TrainConfig,
                model: GlideModel | None = None) -> tuple[GlideModel, list[float]]:
    cfg = config.glide
    frozen_text.set_frozen(True)
    frozen_local.set_frozen(True)
    init_rng = _stage_rng(config.seed, "glide", "init")
    if model is None:
        model = GlideModel(config.model, init_rng)
    sample_rng = _stage_rng(config.seed, "glide", "negatives")
    drop_rng = _stage_rng(config.seed, "glide", "dropout")

    # frozen per-snapshot inputs: text/local block embeddings
    snap_inputs: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for sid, bids in sorted(corpus.blocks_by_snapshot.items()):
        t = frozen_text.encode_batch([corpus.block_text[b] for b in bids]).data
        l = frozen_local.encode_batch([corpus.dfgs[b] for b in bids]).data
        snap_inputs[sid] = (t, l)
    qvec_list = _freeze_text_vectors(frozen_text, [ex.text for ex in dataset])
    qvecs = {ex.query_id: v for ex, v in zip(dataset, qvec_list)}

    by_snapshot: dict[str, list[TrainingExample]] = {}
    for ex in dataset:
        by_snapshot.setdefault(ex.snapshot_id, []).append(ex)
    snapshot_ids = sorted(by_snapshot)

    opt = AdamW(model.trainable(), lr=cfg.lr)
    steps_per_epoch = sum(
        max(1, (len(v) + cfg.batch_size - 1) // cfg.batch_size)
        for v in by_snapshot.values())
    total_steps = cfg.epochs * steps_per_epoch
    losses: list[float] = []
    step = 0
    for _ in range(cfg.epochs):
        for sid in snapshot_ids:
            exs = by_snapshot[sid]
            order = sample_rng.permutation(len(exs))
            bids = corpus.blocks_by_snapshot[sid]
            pos_of = {b: i for i, b in enumerate(bids)}
            for start in range(0, len(order), cfg.batch_size):
                chunk = [exs[i] for i in order[start:start + cfg.batch_size]]
                t, l = snap_inputs[sid]
                H = model.encode_blocks(corpus.dtgs[sid], t, l,
                                        train=True, rng=drop_rng)
                terms = []
                for ex in chunk:
                    qg = model.project_queries(Tensor(qvecs[ex.query_id]))
                    sims = matmul(H, qg)
                    for pos_bid in ex.positives:
                        negs = _sample_negatives(corpus, ex, cfg.negatives,
                                                 sample_rng)
                        pidx = [pos_of[pos_bid]]
                        nidx = [pos_of[b] for b in negs]
                        col = reshape(sims, (-1, 1))
                        pos_sim = tsum(gather_rows(col, pidx))
                        neg_sims = reshape(gather_rows(col, nidx), (-1,))
                        terms.append(reshape(loss_infonce_listwise(
                            pos_sim, neg_sims, config.model.tau_glob), (1,)))
                loss = tmean(concat(terms, axis=0))
                opt.zero_grad()
                loss.backward()
                opt.step(linear_warmup_lr(step, total_steps, cfg.lr,
                                          cfg.warmup_frac))
                losses.append(loss.item())
                step += 1
    return model, losses


def train_router(dataset: list[TrainingExample], frozen_text: TextEncoderModel,
                 frozen_local: LocalEncoderModel, frozen_glide: GlideModel,
                 corpus: Corpus, config: TrainConfig,
                 model: RouterModel | None = None) -> tuple[RouterModel, list[float]]:
    cfg = config.router
    for m in (frozen_text, frozen_local, frozen_glide):
        m.set_frozen(True)
    init_rng = _stage_rng(config.seed, "router", "init")
    if model is None:
        model = RouterModel(config.model, init_rng)
    sample_rng = _stage_rng(config.seed, "router", "negatives")
    drop_rng = _stage_rng(config.seed, "router", "dropout")

    # precompute frozen evidence matrices per snapshot
    evidence: dict[str, np.ndarray] = {}  # snapshot -> [n, 3] per query? no:
    snap_embeds: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    for sid, bids in sorted(corpus.blocks_by_snapshot.items()):
        t = frozen_text.encode_batch([corpus.block_text[b] for b in bids]).data
        l = frozen_local.encode_batch([corpus.dfgs[b] for b in bids]).data
        g = frozen_glide.encode_blocks(corpus.dtgs[sid], t, l).data
        snap_embeds[sid] = (t, l, g)
    qvec_list = _freeze_text_vectors(frozen_text, [ex.text for ex in dataset])
    qvecs = {ex.query_id: v for ex, v in zip(dataset, qvec_list)}

    opt = AdamW(model.trainable(), lr=cfg.lr)
    steps_per_epoch = max(1, (len(dataset) + cfg.batch_size - 1) // cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch
    losses: list[float] = []
    step = 0
    for _ in range(cfg.epochs):
        order = sample_rng.permutation(len(dataset))
        for start in range(0, len(order), cfg.batch_size):
            chunk = [dataset[i] for i in order[start:start + cfg.batch_size]]
            terms = []
            for ex in chunk:
                sid = ex.snapshot_id
                bids = corpus.blocks_by_snapshot[sid]
                pos_of = {b: i for i, b in enumerate(bids)}
                t, l, g = snap_embeds[sid]
                qv = qvecs[ex.query_id]
                qg = frozen_glide.project_queries(Tensor(qv)).data
                ev = np.stack([t @ qv, l @ qv, g @ qg], axis=1)  # [n, 3]
                alpha = model.route(Tensor(qv), train=True, rng=drop_rng)
                fused = matmul(Tensor(ev), alpha)
                pidx = [pos_of[b] for b in ex.positives]
                col = reshape(fused, (-1, 1))
                pos_scores = reshape(gather_rows(col, pidx), (-1,))
                neg_pool = [i for i, b in enumerate(bids)
                            if b not in ex.positives]
                k = min(cfg.negatives * max(1, len(pidx)), len(neg_pool))
                nsel = sorted(sample_rng.choice(len(neg_pool), size=k,
                                                replace=False)) if k else []
                nidx = [neg_pool[i] for i in nsel]
                if not nidx:
                    continue
                neg_scores = reshape(gather_rows(col, nidx), (-1,))
                terms.append(reshape(loss_margin_rank(
                    pos_scores, neg_scores, config.gamma), (1,)))
            if not terms:
                continue
            loss = tmean(concat(terms, axis=0))
            opt.zero_grad()
            loss.backward()
            opt.step(linear_warmup_lr(step, total_steps, cfg.lr, cfg.warmup_frac))
            losses.append(loss.item())
            step += 1
    return model, losses


# ---------------------------------------------------------------- pipeline

class TrainingPipeline:
    """Runs the staged schedule against a checkpoint directory."""

    def __init__(self, corpus: Corpus, dataset: list[TrainingExample],
                 config: TrainConfig, out_dir):
        self.corpus = corpus
        self.dataset = dataset
        self.config = config
        self.out_dir = Path(out_dir)

    def _ckpt_path(self, stage: str) -> Path:
        return self.out_dir / STAGE_FILES[stage]

    def _require(self, stage: str):
        for prior in STAGE_ORDER[:STAGE_ORDER.index(stage)]:
            if not self._ckpt_path(prior).is_file():
                raise MissingCheckpoint(
                    f"stage {stage!r} requires checkpoint for {prior!r} "
                    f"({self._ckpt_path(prior)})")

    def _load_models(self, upto: str):
        """Rebuild and load every model strictly before `upto`."""
        cfg = self.config
        models = {}
        idx = STAGE_ORDER.index(upto)
        builders = {
            "text": lambda: TextEncoderModel(cfg.model, _stage_rng(cfg.seed, "text", "init")),
            "local": lambda: LocalEncoderModel(cfg.model, _stage_rng(cfg.seed, "local", "init")),
            "glide": lambda: GlideModel(cfg.model, _stage_rng(cfg.seed, "glide", "init")),
            "router": lambda: RouterModel(cfg.model, _stage_rng(cfg.seed, "router", "init")),
        }
        for stage in STAGE_ORDER[:idx]:
            m = builders[stage]()
            _, arrays = load_checkpoint(self._ckpt_path(stage))
            m.load_state(arrays)
            m.set_frozen(True)
            models[stage] = m
        return models

    def run_stage(self, stage: str) -> list[float]:
        self._require(stage)
        prior = self._load_models(stage)
        if stage == "text":
            model, losses = train_text(self.dataset, self.corpus, self.config)
        elif stage == "local":
            model, losses = train_local(self.dataset, prior["text"],
                                        self.corpus, self.config)
        elif stage == "glide":
            model, losses = train_glide(self.dataset, prior["text"],
                                        prior["local"], self.corpus, self.config)
        elif stage == "router":
            model, losses = train_router(self.dataset, prior["text"],
                                         prior["local"], prior["glide"],
                                         self.corpus, self.config)
        else:
            raise ValueError(f"unknown stage {stage!r}")
        save_checkpoint(self._ckpt_path(stage), model.state_arrays(),
                        stage=stage, seed=self.config.seed,
                        hyperparameters=self.config.to_json_dict())
        self._update_manifest(stage, losses)
        return losses

    def run_all(self) -> dict[str, list[float]]:
        return {stage: self.run_stage(stage) for stage in STAGE_ORDER}

    def _update_manifest(self, stage: str, losses: list[float]):
        path = self.out_dir / "manifest.json"
        manifest = json.loads(path.read_text()) if path.is_file() else {
            "seed": self.config.seed, "stages": {}}
        manifest["stages"][stage] = {
            "checkpoint": STAGE_FILES[stage],
            "num_steps": len(losses),
            "losses": [round(x, 12) for x in losses],
        }
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")

    def load_all(self):
        """All four trained models, verifying every checkpoint exists."""
        for stage in STAGE_ORDER:
            if not self._ckpt_path(stage).is_file():
                raise MissingCheckpoint(f"missing {self._ckpt_path(stage)}")
        models = self._load_models("router")
        m = RouterModel(self.config.model, _stage_rng(self.config.seed, "router", "init"))
        _, arrays = load_checkpoint(self._ckpt_path("router"))
        m.load_state(arrays)
        m.set_frozen(True)
        models["router"] = m
        return models
