"""How far tuning moved the weights, grouped by module."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from ..model import EncoderModel
from .snapshot import ModelSnapshot, as_snapshot


def module_of(name: str) -> str:
    """``layer.3.attention.query.weight`` -> ``layer.3.attention``; ``embeddings.token.weight`` -> ``embeddings``."""
    parts = name.split(".")
    return ".".join(parts[:3]) if parts[0] == "layer" else parts[0]


@dataclass(frozen=True)
class DeviationReport:
    groups: dict  # module -> (l2, relative)
    total: float
    total_relative: float

    def l2(self, module: str) -> float:
        return self.groups[module][0]

    def relative(self, module: str) -> float:
        return self.groups[module][1]

    def to_rows(self) -> list:
        rows = [{"module": m, "l2": l2, "relative": rel} for m, (l2, rel) in self.groups.items()]
        return rows + [{"module": "total", "l2": self.total, "relative": self.total_relative}]


def _relative(delta_sq: float, base_sq: float) -> float:
    if base_sq == 0.0:
        return 0.0 if delta_sq == 0.0 else float("inf")
    return float(np.sqrt(delta_sq / base_sq))


def parameter_deviation(
    theta0: Union[ModelSnapshot, EncoderModel], theta1: Union[ModelSnapshot, EncoderModel]
) -> DeviationReport:
    """L2 distance ``||theta1 - theta0||`` per module and overall, plus ``||delta|| / ||theta0||``."""
    a, b = as_snapshot(theta0), as_snapshot(theta1)
    a.check_layout(b)
    sums: dict = {}
    for name in a.names:
        d = b.get(name) - a.get(name)
        base = a.get(name)
        acc = sums.setdefault(module_of(name), [0.0, 0.0])
        acc[0] += float(np.dot(d.ravel(), d.ravel()))
        acc[1] += float(np.dot(base.ravel(), base.ravel()))
    groups = {m: (float(np.sqrt(dsq)), _relative(dsq, bsq)) for m, (dsq, bsq) in sums.items()}
    dsq = sum(v[0] for v in sums.values())
    bsq = sum(v[1] for v in sums.values())
    return DeviationReport(groups, float(np.sqrt(dsq)), _relative(dsq, bsq))
