"""Adam with bias correction and the linear warmup/decay schedule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ..tensor.core import NonFiniteError, Parameter


@dataclass
class OptimizerState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first: dict = field(default_factory=dict)
    second: dict = field(default_factory=dict)


def adam_step(params: Iterable[Parameter], state: OptimizerState, lr: float) -> OptimizerState:
    """One in-place Adam update of every non-frozen parameter.

    Frozen parameters are skipped outright: their values and moments are
    never touched.
    """
    params = [p for p in params if not p.frozen]
    for p in params:
        if not np.isfinite(p.grad).all():
            raise NonFiniteError(f"non-finite gradient in parameter {p.name}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p in params:
        m = state.first.get(p.name)
        if m is None:
            m = state.first[p.name] = np.zeros_like(p.data)
            state.second[p.name] = np.zeros_like(p.data)
        v = state.second[p.name]
        g = p.grad
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state


def lr_at(step: int, total_steps: int, peak_lr: float, warmup_fraction: float = 0.1) -> float:
    """Linear warmup from 0 to ``peak_lr`` then linear decay to 0 at ``total_steps``."""
    if total_steps <= 0:
        raise ValueError("total_steps must be positive")
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    warmup = warmup_fraction * total_steps
    if step < warmup:
        return peak_lr * step / warmup
    return peak_lr * (total_steps - step) / (total_steps - warmup)
