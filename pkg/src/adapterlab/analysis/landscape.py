"""One-dimensional loss curves along the segment from initial to tuned weights."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..model import EncoderModel
from ..tuning.train import predict
from .snapshot import ModelSnapshot, gather, scatter

# exact division keeps 0.0 and 1.0 on the grid
DEFAULT_GRID = np.arange(-10, 11) / 5.0


@dataclass(frozen=True)
class LandscapeCurve:
    alphas: tuple
    losses: tuple

    def __post_init__(self):
        if len(self.alphas) != len(self.losses):
            raise ValueError(f"{len(self.alphas)} alphas but {len(self.losses)} losses")
        if any(b <= a for a, b in zip(self.alphas, self.alphas[1:])):
            raise ValueError("alphas must be strictly increasing")

    def at(self, alpha: float) -> float:
        return self.losses[self.alphas.index(alpha)]

    def to_rows(self) -> list:
        return [{"alpha": a, "loss": l} for a, l in zip(self.alphas, self.losses)]


def split_loss(model: EncoderModel, split: Sequence, batch_size: int = 64) -> float:
    """Eval-mode mean cross-entropy over the whole split."""
    if not split:
        raise ValueError("cannot compute a loss on an empty split")
    return predict(model, split, batch_size)[1]


def loss_landscape(
    model: EncoderModel,
    theta1: ModelSnapshot,
    theta0: ModelSnapshot,
    split: Sequence,
    grid: Optional[Sequence[float]] = None,
    batch_size: int = 64,
) -> LandscapeCurve:
    """Evaluate ``L(theta0 + alpha * (theta1 - theta0))`` for each alpha.

    ``model`` provides the architecture; it holds ``theta1`` on return.
    """
    theta1.check_layout(theta0)
    scatter(theta1, model)  # also validates the layout against the model
    alphas = tuple(float(a) for a in (DEFAULT_GRID if grid is None else grid))
    delta = theta1.vector - theta0.vector
    losses = []
    try:
        for alpha in alphas:
            point = ModelSnapshot(theta0.vector + alpha * delta, theta0.index, theta0.shapes)
            scatter(point, model)
            losses.append(split_loss(model, split, batch_size))
    finally:
        scatter(theta1, model)
    return LandscapeCurve(alphas, tuple(losses))


def landscape_from_model(model: EncoderModel, split: Sequence, grid=None, batch_size: int = 64) -> LandscapeCurve:
    """Curve between the model's ``initial`` snapshots and its current weights."""
    return loss_landscape(model, gather(model), gather(model, initial=True), split, grid, batch_size)
