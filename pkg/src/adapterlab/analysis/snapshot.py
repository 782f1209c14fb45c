"""Flat parameter vectors with a name -> (offset, length) index."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from ..model import EncoderModel


@dataclass(frozen=True)
class ModelSnapshot:
    """Parameters concatenated in the model's canonical order.

    ``index`` maps each name to ``(offset, length)`` and ``shapes`` to the
    original array shape.  The vector is never aliased to live parameters.
    """

    vector: np.ndarray
    index: dict
    shapes: dict

    def __post_init__(self):
        expected = sum(length for _, length in self.index.values())
        if self.vector.ndim != 1 or self.vector.size != expected:
            raise ValueError(f"snapshot vector of size {self.vector.size} does not match index total {expected}")

    @property
    def names(self) -> list:
        return list(self.index)

    def get(self, name: str) -> np.ndarray:
        offset, length = self.index[name]
        return self.vector[offset : offset + length].reshape(self.shapes[name])

    def same_layout(self, other: "ModelSnapshot") -> bool:
        return list(self.index.items()) == list(other.index.items()) and self.shapes == other.shapes

    def check_layout(self, other: "ModelSnapshot") -> None:
        if self.same_layout(other):
            return
        for (na, ia), (nb, ib) in zip(self.index.items(), other.index.items()):
            if na != nb or ia != ib:
                raise ValueError(f"snapshot index maps differ at parameter {na!r} vs {nb!r} ({ia} vs {ib})")
        raise ValueError(f"snapshot index maps differ in length ({len(self.index)} vs {len(other.index)})")


def gather(model: EncoderModel, initial: bool = False) -> ModelSnapshot:
    """Snapshot current values, or the ``initial`` snapshots when requested."""
    index, shapes, chunks, offset = {}, {}, [], 0
    for name, p in model.params.items():
        value = p.initial if initial else p.data
        index[name] = (offset, value.size)
        shapes[name] = value.shape
        chunks.append(value.ravel())
        offset += value.size
    return ModelSnapshot(np.concatenate(chunks).astype(np.float64, copy=True), index, shapes)


def scatter(snapshot: ModelSnapshot, model: EncoderModel) -> EncoderModel:
    """Write ``snapshot`` into ``model`` in place (bit-exact)."""
    snapshot.check_layout(gather_layout(model))
    for name, p in model.params.items():
        p.data[...] = snapshot.get(name)
    return model


def gather_layout(model: EncoderModel) -> ModelSnapshot:
    index, shapes, offset = {}, {}, 0
    for name, p in model.params.items():
        index[name] = (offset, p.size)
        shapes[name] = p.shape
        offset += p.size
    return ModelSnapshot(np.zeros(offset), index, shapes)


def as_snapshot(x: Union[EncoderModel, ModelSnapshot]) -> ModelSnapshot:
    return gather(x) if isinstance(x, EncoderModel) else x
