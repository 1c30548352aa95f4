"""Optimization: warmup/decay schedule, class weighting, curriculum loop.

The curriculum trains one chronological tier at a time, oldest first and
most modern last, carrying optimizer state across tiers; each tier gets
its own scheduler horizon (warmup then linear decay to zero).  Switching
``curriculum`` off trains on the shuffled union for the same number of
passes over the data.  After every epoch the model is scored on the dev
set and the checkpoint with the best dev WOR is kept.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import CorpusError, label_distribution
from .hebrew import LABELS
from .metrics import AlignedPair, EmptyEval, EvalReport, report
from .model import InvalidConfig, Model, make_batch

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class OutOfRange(ValueError):
    pass


class EmptyDistribution(ValueError):
    pass


class EmptyTiers(CorpusError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    peak_lr: float = 1e-5
    warmup_frac: float = 0.2
    batch_size: int = 16
    epochs_per_tier: int = 1
    weight_decay: float = 0.01
    seed: int = 0
    use_class_weights: bool = False
    curriculum: bool = True
    class_weights_scope: str = "all"  # "all" or "modern"

    def __post_init__(self):
        if self.peak_lr <= 0:
            raise InvalidConfig("peak_lr must be positive")
        if not 0.0 < self.warmup_frac < 1.0:
            raise InvalidConfig("warmup_frac must be in (0, 1)")
        if self.batch_size < 1 or self.epochs_per_tier < 1:
            raise InvalidConfig("batch_size and epochs_per_tier must be >= 1")
        if self.weight_decay < 0:
            raise InvalidConfig("weight_decay must be >= 0")
        if self.class_weights_scope not in ("all", "modern"):
            raise InvalidConfig("class_weights_scope must be 'all' or 'modern'")

    @classmethod
    def from_file(cls, path: str) -> "TrainConfig":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))

    def as_dict(self) -> dict:
        return {
            "peak_lr": self.peak_lr,
            "warmup_frac": self.warmup_frac,
            "batch_size": self.batch_size,
            "epochs_per_tier": self.epochs_per_tier,
            "weight_decay": self.weight_decay,
            "seed": self.seed,
            "use_class_weights": self.use_class_weights,
            "curriculum": self.curriculum,
            "class_weights_scope": self.class_weights_scope,
        }


def lr_at_step(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Linear warmup from 0 to peak_lr, then linear decay back to 0.

    The warmup span is round(warmup_frac * total_steps) steps (at least 1,
    at most total_steps - 1), so the peak value is hit exactly once at the
    warmup boundary and both endpoints are exactly zero.
    """
    if total_steps <= 0 or not 0 <= step <= total_steps:
        raise OutOfRange(f"step {step} outside [0, {total_steps}]")
    if step >= total_steps:
        return 0.0
    warmup = int(round(cfg.warmup_frac * total_steps))
    warmup = max(1, min(warmup, total_steps - 1)) if total_steps > 1 else 1
    if step < warmup:
        return cfg.peak_lr * (step / warmup)
    return cfg.peak_lr * ((total_steps - step) / (total_steps - warmup))


def class_weights(distribution) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-category weight vectors proportional to inverse label frequency.

    Rescaled so the mean weight over the observed labels of each category
    is exactly 1; labels never seen in the distribution get the category's
    maximum weight.  A category with no observations falls back to all-ones;
    raises EmptyDistribution when nothing was observed at all.
    """
    if all(not dist for dist in distribution):
        raise EmptyDistribution("no label counts in any category")
    vectors = []
    for c, dist in enumerate(distribution):
        k = LABELS.sizes[c]
        weights = np.ones(k, dtype=np.float64)
        if dist:
            if any(cnt <= 0 for cnt in dist.values()):
                raise ValueError("label counts must be positive")
            raw = {lab: 1.0 / cnt for lab, cnt in dist.items()}
            mean = sum(raw.values()) / len(raw)
            scaled = {lab: r / mean for lab, r in raw.items()}
            weights[:] = max(scaled.values())
            for lab, w in scaled.items():
                weights[lab] = w
        vectors.append(weights)
    return tuple(vectors)


class AdamW:
    """Adaptive-moment optimizer with decoupled weight decay.

    Decay applies to weight matrices and embeddings only, not to biases or
    norm parameters.  Moment state lives in float64 across the whole run.
    """

    def __init__(self, model: Model, weight_decay: float = 0.01):
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros(v.shape) for k, v in model.params.items()}
        self.v = {k: np.zeros(v.shape) for k, v in model.params.items()}

    def step(self, model: Model, grads: dict[str, np.ndarray], lr: float):
        self.t += 1
        bias1 = 1.0 - ADAM_BETA1 ** self.t
        bias2 = 1.0 - ADAM_BETA2 ** self.t
        for name, p in model.params.items():
            g = grads[name]
            m = self.m[name] = ADAM_BETA1 * self.m[name] + (1 - ADAM_BETA1) * g
            v = self.v[name] = ADAM_BETA2 * self.v[name] + (1 - ADAM_BETA2) * g * g
            update = lr * (m / bias1) / (np.sqrt(v / bias2) + ADAM_EPS)
            if p.ndim >= 2:
                update = update + lr * self.weight_decay * p
            model.params[name] = (p - update).astype(p.dtype)


@dataclass
class EpochRecord:
    phase: str            # tier1..tier4, or "mixed"
    tier: int | None      # 1..4 under the curriculum, None when mixed
    epoch: int            # 1-based within the phase
    mean_loss: float
    lr_final: float
    dec: float
    cha: float
    wor: float
    voc: float

    def as_dict(self) -> dict:
        return {
            "phase": self.phase, "tier": self.tier, "epoch": self.epoch,
            "mean_loss": self.mean_loss, "lr_final": self.lr_final,
            "DEC": self.dec, "CHA": self.cha, "WOR": self.wor, "VOC": self.voc,
        }


@dataclass
class TrainingLog:
    phases: list[tuple[str, int]] = field(default_factory=list)  # name, chunks
    epochs: list[EpochRecord] = field(default_factory=list)
    step_lrs: list[tuple[str, int, float]] = field(default_factory=list)
    best_epoch: int | None = None  # index into epochs

    def lines(self) -> str:
        """Line-delimited epoch records, ready to write to disk."""
        return "\n".join(json.dumps(r.as_dict(), ensure_ascii=False)
                         for r in self.epochs)


def evaluate_on(model: Model, chunks) -> EvalReport:
    """Predict every chunk and score the predictions against its labels."""
    chunks = list(chunks)
    if not chunks:
        raise EmptyEval("no chunks to evaluate")
    pairs = [AlignedPair(c.marked(), model.predict(c.bases)) for c in chunks]
    return report(pairs)


def _phases(tiers, curriculum: bool):
    if curriculum:
        return [(f"tier{i + 1}", i + 1, list(tier)) for i, tier in enumerate(tiers)]
    merged = [c for tier in tiers for c in tier]
    return [("mixed", None, merged)]


def train_curriculum(model: Model, tiers, dev_chunks, cfg: TrainConfig):
    """Run the training loop; returns (best model, TrainingLog).

    ``tiers`` is the tier_partition output, oldest to most modern.  Each
    phase gets epochs_per_tier epochs and its own scheduler horizon; the
    optimizer carries its moment state across phases.  Model selection is
    by best dev WOR (ties keep the earlier epoch).
    """
    tiers = [list(t) for t in tiers]
    if sum(len(t) for t in tiers) == 0:
        raise EmptyTiers("every tier is empty")
    dev_chunks = list(dev_chunks)
    if not dev_chunks:
        raise EmptyEval("dev set is empty")

    weights = None
    if cfg.use_class_weights:
        scope = tiers[-1] if cfg.class_weights_scope == "modern" else \
            [c for t in tiers for c in t]
        weights = class_weights(label_distribution(scope))

    rng = np.random.default_rng(cfg.seed)
    opt = AdamW(model, weight_decay=cfg.weight_decay)
    log = TrainingLog()
    best: Model | None = None
    best_wor = -1.0

    for phase, tier_no, chunks in _phases(tiers, cfg.curriculum):
        log.phases.append((phase, len(chunks)))
        if not chunks:
            continue
        steps_per_epoch = math.ceil(len(chunks) / cfg.batch_size)
        total_steps = cfg.epochs_per_tier * steps_per_epoch
        step = 0
        for epoch in range(1, cfg.epochs_per_tier + 1):
            order = rng.permutation(len(chunks))
            losses = []
            lr = 0.0
            for start in range(0, len(order), cfg.batch_size):
                group = [chunks[i] for i in order[start:start + cfg.batch_size]]
                batch = make_batch(group, model.config)
                # consume the schedule at steps 1..total so the very first
                # update is nonzero; the zero endpoint lands on the last
                # batch of the phase instead of silently wasting the first
                step += 1
                lr = lr_at_step(step, total_steps, cfg)
                loss_val, _, grads = model.loss_and_grads(
                    batch, class_weights=weights, rng=rng)
                opt.step(model, grads, lr)
                log.step_lrs.append((phase, step, lr))
                losses.append(loss_val)
            dev = evaluate_on(model, dev_chunks)
            log.epochs.append(EpochRecord(
                phase, tier_no, epoch, float(np.mean(losses)), lr,
                dev.dec, dev.cha, dev.wor, dev.voc))
            if dev.wor > best_wor:
                best_wor = dev.wor
                best = model.copy()
                log.best_epoch = len(log.epochs) - 1
    return best, log
