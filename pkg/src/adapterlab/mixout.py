"""Mixout: stochastic reset of whole input neurons to their anchor weights."""

from __future__ import annotations

import numpy as np

from .tensor.core import Tensor
from .tensor.ops import _emit, as_tensor


def _check_p(p: float) -> None:
    if not 0.0 <= p < 1.0:
        raise ValueError(f"mixout probability must lie in [0, 1), got {p}")


def mixout_effective_weight(w, w0, p: float, mask, compensate: bool = True) -> np.ndarray:
    """Effective (out, in) weight after mixing masked input columns back to ``w0``.

    With ``compensate`` the result is ``(W_mix - p*w0) / (1 - p)`` so its
    expectation over masks drawn with rate ``p`` equals ``w``.  It is evaluated
    column-wise as ``w0`` for masked columns and ``w0 + (w - w0)/(1 - p)`` for
    the rest, which keeps ``w == w0`` an exact fixed point.
    """
    _check_p(p)
    w = np.asarray(w, dtype=np.float64)
    w0 = np.asarray(w0, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if w.shape != w0.shape or w.ndim != 2:
        raise ValueError(f"mixout: weight {w.shape} and anchor {w0.shape} must be equal 2-D shapes")
    if mask.shape != (w.shape[1],):
        raise ValueError(f"mixout: mask length {mask.shape} != input width {w.shape[1]}")
    if p == 0.0:
        return w.copy()
    if compensate:
        kept = w0 + (w - w0) / (1.0 - p)
    else:
        kept = w
    return np.where(mask[None, :], w0, kept)


def mixout_weight(weight: Tensor, anchor, p: float, mask, compensate: bool = True) -> Tensor:
    """Differentiable Mixout for an (in, out) weight with one mask entry per input row."""
    weight = as_tensor(weight)
    mask = np.asarray(mask, dtype=bool)
    anchor = np.asarray(anchor, dtype=np.float64)
    eff = mixout_effective_weight(weight.data.T, anchor.T, p, mask, compensate).T
    if p == 0.0:
        slope = np.ones(mask.shape)
    else:
        slope = np.where(mask, 0.0, 1.0 / (1.0 - p) if compensate else 1.0)
    slope = slope[:, None]
    return _emit("mixout", np.ascontiguousarray(eff), (weight,), lambda g: (g * slope,))


def sample_mask(rng: np.random.Generator, width: int, p: float) -> np.ndarray:
    return rng.random(width) < p
