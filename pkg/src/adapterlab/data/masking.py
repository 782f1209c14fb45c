"""Dynamic masking for masked-LM training."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .._rng import derive_rng
from .vocab import MASK_ID, NUM_RESERVED, STRUCTURAL_IDS


@dataclass(frozen=True)
class MaskedBatch:
    input_ids: np.ndarray  # (batch, seq), same shape as the source batch
    positions: np.ndarray  # flat row-major indices of selected positions
    targets: np.ndarray  # original ids at ``positions``

    @property
    def empty(self) -> bool:
        return self.positions.size == 0


def mask_for_mlm(
    batch,
    seed: Union[int, np.random.Generator],
    vocab_size: int,
    probability: float = 0.15,
    mask_fraction: float = 0.8,
    random_fraction: float = 0.1,
) -> MaskedBatch:
    """Select non-structural positions with ``probability``; of those 80% become
    [MASK], 10% a uniformly drawn ordinary token, 10% stay unchanged."""
    ids = np.asarray(batch, dtype=np.int64)
    if vocab_size <= NUM_RESERVED:
        raise ValueError(f"vocab_size {vocab_size} leaves no ordinary tokens to sample")
    rng = seed if isinstance(seed, np.random.Generator) else derive_rng(seed, "mlm-mask")
    eligible = ~np.isin(ids, list(STRUCTURAL_IDS))
    selected = eligible & (rng.random(ids.shape) < probability)
    action = rng.random(ids.shape)
    random_ids = rng.integers(NUM_RESERVED, vocab_size, size=ids.shape)
    out = ids.copy()
    to_mask = selected & (action < mask_fraction)
    to_random = selected & (action >= mask_fraction) & (action < mask_fraction + random_fraction)
    out[to_mask] = MASK_ID
    out[to_random] = random_ids[to_random]
    positions = np.flatnonzero(selected)
    return MaskedBatch(out, positions, ids.reshape(-1)[positions])
