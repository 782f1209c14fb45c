"""Finite-difference verification of tape gradients."""

from __future__ import annotations

from typing import Callable, Iterable, Optional

import numpy as np

from .core import Parameter, Tape, Tensor


class NondeterministicFunctionError(RuntimeError):
    pass


def relative_error(analytic, numeric):
    return np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic) + np.abs(numeric))


def gradient_check(
    f: Callable[[], Tensor],
    params: Iterable[Parameter],
    h: float = 1e-5,
    max_elements: Optional[int] = None,
    seed: int = 0,
) -> float:
    """Max relative error between tape gradients and central differences.

    ``f`` takes no arguments and rebuilds a scalar loss from the current
    parameter values.  With ``max_elements`` set, at most that many entries
    of each parameter are probed (chosen with ``seed``); otherwise all are.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    params = list(params)
    first = float(f().item())
    second = float(f().item())
    if first != second:
        raise NondeterministicFunctionError(f"f returned {first!r} then {second!r} at the same point")

    saved = [p.grad.copy() for p in params]
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = f()
    tape.backward(loss)
    analytic = [p.grad.copy() for p in params]
    for p, g in zip(params, saved):
        p.grad[...] = g

    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_elements is not None and flat.size > max_elements:
            idx = np.sort(rng.choice(flat.size, size=max_elements, replace=False))
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            up = float(f().item())
            flat[i] = orig - h
            down = float(f().item())
            flat[i] = orig
            numeric = (up - down) / (2.0 * h)
            worst = max(worst, float(relative_error(ga.reshape(-1)[i], numeric)))
    return worst
