"""Task-adaptive masked-LM pretraining on unlabeled task text."""

from __future__ import annotations

import math
import time
from typing import Sequence

import numpy as np

from .._rng import derive_rng
from ..config import TuningPolicy
from ..data.dataset import pad_batch
from ..data.masking import mask_for_mlm
from ..model import EncoderModel, apply_tuning_policy
from ..tensor.core import Tape
from .optim import OptimizerState, adam_step, lr_at
from .train import RunRecord, TrainConfig, batches


def mlm_eval_loss(model: EncoderModel, corpus: Sequence[Sequence[int]], seed: int = 0, batch_size: int = 64) -> float:
    """Eval-mode MLM loss under a fixed masking draw; comparable across models."""
    total, count = 0.0, 0
    for k, b in enumerate(batches(len(corpus), batch_size)):
        ids = pad_batch([corpus[i] for i in b])
        masked = mask_for_mlm(ids, derive_rng(seed, "mlm-eval", k), model.config.vocab_size)
        if masked.empty:
            continue
        loss = model.mlm_loss(masked.input_ids, masked.positions, masked.targets, mode="eval")
        total += loss.item() * masked.positions.size
        count += masked.positions.size
    if count == 0:
        raise ValueError("no maskable positions in the corpus")
    return total / count


def tapt_pretrain(model: EncoderModel, corpus: Sequence[Sequence[int]], policy: TuningPolicy, cfg: TrainConfig):
    """Continue MLM training on ``corpus`` (encoded documents) in place.

    Only the MLM head is active; under adapter tuning the backbone stays
    frozen.  Batches whose draw selects no positions are skipped.  Returns
    ``(record, model)`` where ``record.evaluations`` is the per-step loss.
    """
    if len(corpus) < cfg.batch_size:
        raise ValueError(f"corpus of {len(corpus)} documents is shorter than one batch of {cfg.batch_size}")
    start = time.perf_counter()
    apply_tuning_policy(model, policy, head="mlm_head")
    params = model.parameters()
    model.reseed(cfg.seed)
    shuffle_rng = derive_rng(cfg.seed, "tapt-shuffle")
    n = len(corpus)
    total = cfg.max_steps or cfg.epochs * math.ceil(n / cfg.batch_size)
    peak = cfg.lr_for(policy)
    state = OptimizerState()
    record = RunRecord("tapt", cfg.digest(policy), cfg.seed, policy.name, "mlm_loss", total)
    record.extra["mlm_loss_start"] = mlm_eval_loss(model, corpus, cfg.seed, cfg.eval_batch_size)
    vocab_size = model.config.vocab_size
    step, epoch = 0, 0
    model.train()
    while step < total:
        epoch += 1
        for b in batches(n, cfg.batch_size, shuffle_rng.permutation(n)):
            ids = pad_batch([corpus[i] for i in b])
            masked = mask_for_mlm(ids, derive_rng(cfg.seed, "mlm-mask", step), vocab_size, cfg.mlm_probability)
            loss_value = 0.0
            if not masked.empty:
                model.zero_grad()
                with Tape() as tape:
                    loss = model.mlm_loss(masked.input_ids, masked.positions, masked.targets)
                tape.backward(loss)
                adam_step(params, state, lr_at(step, total, peak, cfg.warmup_fraction))
                loss_value = loss.item()
            step += 1
            record.evaluations.append({"step": step, "epoch": epoch, "train_loss": loss_value, "masked": int(masked.positions.size)})
            if step >= total:
                break
    model.eval()
    record.extra["mlm_loss_end"] = mlm_eval_loss(model, corpus, cfg.seed, cfg.eval_batch_size)
    record.selected_step, record.selected_epoch = step, epoch
    record.duration_s = time.perf_counter() - start
    return record, model


def mlm_batch_losses(record: RunRecord) -> np.ndarray:
    return np.array([e["train_loss"] for e in record.evaluations if e["masked"]])
