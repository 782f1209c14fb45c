"""Supervised tuning with dev-based checkpoint selection, and evaluation."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .._rng import derive_rng
from ..config import TuningPolicy
from ..data.dataset import LabeledExample, TaskDataset, collate
from ..model import EncoderModel, apply_tuning_policy
from ..tensor import ops
from ..tensor.core import Tape
from .metrics import METRICS, compute_metric
from .optim import OptimizerState, adam_step, lr_at

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 16
    peak_lr: Optional[float] = None  # None: 2e-5 for fine-tuning, 1e-4 for adapters
    warmup_fraction: float = 0.1
    seed: int = 0
    eval_every: Optional[int] = None  # steps; None evaluates at each epoch end
    metric: str = "accuracy"
    max_steps: Optional[int] = None
    mlm_probability: float = 0.15
    eval_batch_size: int = 64

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("epochs and batch_size must be positive")
        if self.peak_lr is not None and self.peak_lr <= 0:
            raise ValueError("peak_lr must be positive")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ValueError("warmup_fraction must lie in [0, 1)")
        if self.eval_every is not None and self.eval_every <= 0:
            raise ValueError("eval_every must be a positive step count")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}; expected one of {METRICS}")
        if self.max_steps is not None and self.max_steps <= 0:
            raise ValueError("max_steps must be positive")

    def lr_for(self, policy: TuningPolicy) -> float:
        return self.peak_lr if self.peak_lr is not None else policy.default_lr

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self, policy: Optional[TuningPolicy] = None) -> str:
        payload = {"train": self.to_dict(), "policy": policy.to_dict() if policy else None}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class RunRecord:
    kind: str
    config_digest: str
    seed: int
    policy: str
    metric: str
    total_steps: int
    evaluations: list = field(default_factory=list)
    selected_step: Optional[int] = None
    selected_epoch: Optional[int] = None
    best_dev_metric: Optional[float] = None
    test_metric: Optional[float] = None
    extra: dict = field(default_factory=dict)
    duration_s: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(**d)

    def comparable(self) -> dict:
        """Everything except wall-clock time."""
        d = self.to_dict()
        d.pop("duration_s")
        return d

    def dev_trace(self) -> list:
        return [e["dev_metric"] for e in self.evaluations]


def batches(n: int, batch_size: int, order: Optional[np.ndarray] = None):
    idx = np.arange(n) if order is None else order
    for start in range(0, n, batch_size):
        yield idx[start : start + batch_size]


def predict(model: EncoderModel, examples: Sequence[LabeledExample], batch_size: int = 64):
    """Eval-mode predictions and mean cross-entropy over ``examples``."""
    preds, total = [], 0.0
    for b in batches(len(examples), batch_size):
        ids, labels = collate([examples[i] for i in b])
        logits = model.classification_logits(ids, mode="eval")
        preds.append(np.argmax(logits.data, axis=1))
        total += ops.cross_entropy(logits, labels).item() * len(b)
    return np.concatenate(preds), total / len(examples)


def evaluate(model: EncoderModel, split: Sequence[LabeledExample], metric: str = "accuracy", batch_size: int = 64) -> float:
    if not split:
        raise ValueError("cannot evaluate on an empty split")
    preds, _ = predict(model, split, batch_size)
    return compute_metric(metric, [e.label for e in split], preds)


def select_checkpoint(dev_metrics: Sequence[float]) -> int:
    """Index of the first maximum."""
    if not dev_metrics:
        raise ValueError("no evaluations to select from")
    return int(np.argmax(np.asarray(dev_metrics, dtype=float)))


def train(model: EncoderModel, dataset: TaskDataset, policy: TuningPolicy, cfg: TrainConfig):
    """Tune ``model`` in place and leave it at the best-dev checkpoint.

    Returns ``(record, model)``.  The training split is reshuffled every
    epoch from ``cfg.seed``; evaluation happens at each epoch end or every
    ``cfg.eval_every`` steps.
    """
    if not dataset.train:
        raise ValueError("training split is empty")
    if not dataset.dev:
        raise ValueError("dev split is empty; checkpoint selection needs it")
    if dataset.num_classes != model.num_classes:
        raise ValueError(f"dataset has {dataset.num_classes} classes, model head has {model.num_classes}")
    start = time.perf_counter()
    apply_tuning_policy(model, policy, head="classifier")
    params = model.parameters()
    model.reseed(cfg.seed)
    shuffle_rng = derive_rng(cfg.seed, "shuffle")
    n = len(dataset.train)
    steps_per_epoch = math.ceil(n / cfg.batch_size)
    total = cfg.max_steps or cfg.epochs * steps_per_epoch
    peak = cfg.lr_for(policy)
    state = OptimizerState()
    record = RunRecord("train", cfg.digest(policy), cfg.seed, policy.name, cfg.metric, total)
    best_value, best_snapshot = -math.inf, None
    recent: list[float] = []
    step = 0

    def run_eval(epoch):
        nonlocal best_value, best_snapshot
        preds, dev_loss = predict(model, dataset.dev, cfg.eval_batch_size)
        value = compute_metric(cfg.metric, [e.label for e in dataset.dev], preds)
        if math.isnan(value):
            raise FloatingPointError(f"dev {cfg.metric} is NaN at step {step}")
        record.evaluations.append(
            {
                "step": step,
                "epoch": epoch,
                "train_loss": float(np.mean(recent)) if recent else None,
                "dev_loss": dev_loss,
                "dev_metric": value,
            }
        )
        recent.clear()
        if value > best_value:
            best_value = value
            best_snapshot = {p.name: p.data.copy() for p in params if not p.frozen}
            record.selected_step, record.selected_epoch = step, epoch
        log.debug("step %d epoch %d dev %s=%.4f", step, epoch, cfg.metric, value)

    epoch = 0
    while step < total:
        epoch += 1
        order = shuffle_rng.permutation(n)
        model.train()
        for b in batches(n, cfg.batch_size, order):
            ids, labels = collate([dataset.train[i] for i in b])
            model.zero_grad()
            with Tape() as tape:
                loss = model.classification_loss(ids, labels)
            tape.backward(loss)
            adam_step(params, state, lr_at(step, total, peak, cfg.warmup_fraction))
            recent.append(loss.item())
            step += 1
            if cfg.eval_every and step % cfg.eval_every == 0:
                model.eval()
                run_eval(epoch)
                model.train()
            if step >= total:
                break
        model.eval()
        if cfg.eval_every is None:
            run_eval(epoch)
    if not record.evaluations or record.evaluations[-1]["step"] != step:
        run_eval(epoch)

    for p in params:
        if best_snapshot is not None and p.name in best_snapshot:
            p.data[...] = best_snapshot[p.name]
    model.eval()
    record.best_dev_metric = best_value
    if dataset.test:
        record.test_metric = evaluate(model, dataset.test, cfg.metric, cfg.eval_batch_size)
    record.duration_s = time.perf_counter() - start
    return record, model
