"""Learning-rate x seed grids of full training runs."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ..config import TuningPolicy
from ..data.dataset import TaskDataset
from ..model import EncoderModel
from ..tensor.core import NonFiniteError
from ..tuning.train import TrainConfig, train

DEFAULT_LRS = (2e-5, 4e-5, 6e-5, 8e-5, 1e-4)

ModelSource = Union[EncoderModel, Callable[[int], EncoderModel]]


@dataclass(frozen=True)
class SweepCell:
    lr: float
    seed: int
    metric: float
    failed: bool = False
    error: Optional[str] = None


def quartiles(values) -> tuple:
    """(min, Q1, median, Q3, max) with linear interpolation."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("no values to summarize")
    return tuple(float(q) for q in np.percentile(v, [0, 25, 50, 75, 100]))


def iqr(values) -> float:
    q = quartiles(values)
    return q[3] - q[1]


@dataclass(frozen=True)
class SweepResult:
    policy: str
    lrs: tuple
    seeds: tuple
    cells: tuple

    def __post_init__(self):
        have = {(c.lr, c.seed) for c in self.cells}
        missing = [(lr, s) for lr in self.lrs for s in self.seeds if (lr, s) not in have]
        if missing:
            raise ValueError(f"sweep grid has unfilled cells: {missing}")

    def cell(self, lr: float, seed: int) -> SweepCell:
        return next(c for c in self.cells if c.lr == lr and c.seed == seed)

    def values(self, lr: Optional[float] = None) -> list:
        return [c.metric for c in self.cells if lr is None or c.lr == lr]

    def summary(self) -> dict:
        return {lr: quartiles(self.values(lr)) for lr in self.lrs}

    def pooled_iqr(self) -> float:
        return iqr(self.values())

    @property
    def failures(self) -> list:
        return [c for c in self.cells if c.failed]

    def to_rows(self) -> list:
        return [
            {"policy": self.policy, "lr": c.lr, "seed": c.seed, "metric": c.metric, "failed": int(c.failed)}
            for c in self.cells
        ]


def _make_model(source: ModelSource, seed: int) -> EncoderModel:
    return source.copy() if isinstance(source, EncoderModel) else source(seed)


def run_cell(dataset: TaskDataset, source: ModelSource, policy: TuningPolicy, cfg: TrainConfig, lr: float, seed: int) -> SweepCell:
    """One training run; divergence is captured as a failed cell scoring 0."""
    model = _make_model(source, seed)
    try:
        record, _ = train(model, dataset, policy, replace(cfg, peak_lr=lr, seed=seed))
    except (NonFiniteError, FloatingPointError) as exc:
        return SweepCell(lr, seed, 0.0, True, str(exc))
    if record.test_metric is None or not math.isfinite(record.test_metric):
        return SweepCell(lr, seed, 0.0, True, "non-finite test metric")
    return SweepCell(lr, seed, float(record.test_metric))


def _run_cell_args(args):
    return run_cell(*args)


def lr_sweep(
    dataset: TaskDataset,
    source: ModelSource,
    policy: TuningPolicy,
    lrs: Sequence[float] = DEFAULT_LRS,
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    cfg: TrainConfig = TrainConfig(),
    workers: int = 1,
) -> SweepResult:
    """Train one model per (lr, seed) cell and collect test metrics.

    ``source`` is either a model to copy for every cell or a factory called
    with the cell's seed.  Cells are independent, so ``workers > 1`` runs them
    in separate processes with identical results.
    """
    lrs, seeds = tuple(float(x) for x in lrs), tuple(int(s) for s in seeds)
    if not lrs or not seeds:
        raise ValueError("lr and seed grids must be non-empty")
    jobs = [(dataset, source, policy, cfg, lr, seed) for lr in lrs for seed in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            cells = list(pool.map(_run_cell_args, jobs))
    else:
        cells = [run_cell(*job) for job in jobs]
    return SweepResult(policy.name, lrs, seeds, tuple(cells))
