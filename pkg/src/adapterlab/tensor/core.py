"""Tensors and parameters, plus the recording tape for reverse-mode autodiff."""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

_uids = itertools.count()
_local = threading.local()


class NonFiniteError(FloatingPointError):
    """An operation produced (or was handed) a NaN or infinity."""


def check_finite(arr: np.ndarray, where: str) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"non-finite value produced by {where}")


class Tensor:
    """A dense float64 array that can take part in recorded computations."""

    __slots__ = ("data", "uid")

    def __init__(self, data, *, _checked: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if not _checked:
            check_finite(arr, "Tensor construction")
        self.data = arr
        self.uid = next(_uids)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(shape={self.shape})"

    def __getstate__(self):
        return {"data": self.data}

    def __setstate__(self, state):
        # uids are process-local tape keys, never carried across copies
        self.data = state["data"]
        self.uid = next(_uids)

    # arithmetic sugar; the implementations live in ops
    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, other)

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops

        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, other)


class Parameter(Tensor):
    """A named leaf tensor with a gradient buffer and a frozen flag.

    ``initial`` is a read-only copy of the value taken when the parameter is
    created; it is the anchor for Mixout, deviation reports and freezing checks.
    """

    __slots__ = ("name", "grad", "frozen", "initial")

    def __init__(self, name: str, value, frozen: bool = False, initial=None):
        super().__init__(np.array(value, dtype=np.float64, copy=True))
        self.name = name
        self.grad = np.zeros_like(self.data)
        self.frozen = frozen
        init = self.data.copy() if initial is None else np.array(initial, dtype=np.float64, copy=True)
        if init.shape != self.data.shape:
            raise ValueError(f"{name}: initial snapshot shape {init.shape} != value shape {self.data.shape}")
        init.setflags(write=False)
        self.initial = init

    @property
    def value(self) -> np.ndarray:
        return self.data

    def __getstate__(self):
        return {"data": self.data, "name": self.name, "grad": self.grad, "frozen": self.frozen, "initial": self.initial}

    def __setstate__(self, state):
        self.data = state["data"]
        self.uid = next(_uids)
        self.name = state["name"]
        self.grad = state["grad"]
        self.frozen = state["frozen"]
        init = np.array(state["initial"], copy=True)
        init.setflags(write=False)
        self.initial = init

    def zero_grad(self) -> None:
        self.grad.fill(0.0)

    def __repr__(self):
        flag = ", frozen" if self.frozen else ""
        return f"Parameter({self.name!r}, shape={self.shape}{flag})"


@dataclass(eq=False)
class Node:
    kind: str
    inputs: tuple
    output: Tensor
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tape:
    """Records operations in execution order while active.

    Use as a context manager::

        with Tape() as tape:
            loss = model.classification_loss(ids, labels)
        tape.backward(loss)
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self._produced: set[int] = set()
        self._prev = None

    def __enter__(self):
        self._prev = getattr(_local, "tape", None)
        _local.tape = self
        return self

    def __exit__(self, *exc):
        _local.tape = self._prev
        self._prev = None
        return False

    def __len__(self):
        return len(self.nodes)

    def __contains__(self, tensor: Tensor) -> bool:
        return tensor.uid in self._produced

    def record(self, kind, inputs, output, backward) -> None:
        self.nodes.append(Node(kind, tuple(inputs), output, backward))
        self._produced.add(output.uid)

    def backward(self, loss: Tensor) -> None:
        backward(self, loss)


def active_tape() -> Optional[Tape]:
    return getattr(_local, "tape", None)


def backward(tape: Tape, loss: Tensor) -> None:
    """Accumulate d(loss)/d(value) into ``.grad`` of every reachable Parameter.

    Frozen parameters receive gradients like any other; freezing is the
    optimizer's business.
    """
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss not in tape:
        raise ValueError("loss was not produced under this tape")
    grads: dict[int, np.ndarray] = {loss.uid: np.ones_like(loss.data)}
    leaves: dict[int, Parameter] = {}
    for node in reversed(tape.nodes):
        g = grads.pop(node.output.uid, None)
        if g is None:
            continue
        for t, gi in zip(node.inputs, node.backward(g)):
            if gi is None:
                continue
            prev = grads.get(t.uid)
            grads[t.uid] = gi if prev is None else prev + gi
            if isinstance(t, Parameter):
                leaves[t.uid] = t
    for uid, p in leaves.items():
        g = grads[uid]
        check_finite(g, f"backward into {p.name}")
        p.grad += g
