"""Differentiable primitives.

Each op computes its forward value eagerly and, when a tape is active,
records a closure that maps the output gradient to input gradients.
Inputs that are not Tensors (token ids, masks, targets) are treated as
constants.
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from .core import Tensor, active_tape, check_finite


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _emit(kind, value, inputs, backward) -> Tensor:
    check_finite(value, kind)
    out = Tensor(value, _checked=True)
    tape = active_tape()
    if tape is not None:
        tape.record(kind, inputs, out, backward)
    return out


def unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _broadcast_shape(kind, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{kind}: shapes {a.shape} and {b.shape} do not broadcast") from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)
    sa, sb = a.shape, b.shape
    return _emit("add", a.data + b.data, (a, b), lambda g: (unbroadcast(g, sa), unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)
    sa, sb = a.shape, b.shape
    return _emit("sub", a.data - b.data, (a, b), lambda g: (unbroadcast(g, sa), unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)
    ad, bd = a.data, b.data

    def backward(g):
        return unbroadcast(g * bd, ad.shape), unbroadcast(g * ad, bd.shape)

    return _emit("mul", ad * bd, (a, b), backward)


def scale(a, factor: float) -> Tensor:
    a = as_tensor(a)
    return _emit("scale", a.data * factor, (a,), lambda g: (g * factor,))


def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes; ``b`` may be a plain 2-D matrix."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul: shape mismatch {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def backward(g):
        ga = unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape)
        if bd.ndim == 2:
            gb = ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        else:
            gb = unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape)
        return ga, gb

    return _emit("matmul", ad @ bd, (a, b), backward)


def linear(x, weight, bias=None) -> Tensor:
    """``x @ weight + bias`` with weight stored as (in, out)."""
    x, weight = as_tensor(x), as_tensor(weight)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[0]:
        raise ValueError(f"linear: input {x.shape} incompatible with weight {weight.shape}")
    xd, wd = x.data, weight.data
    out = xd @ wd
    inputs = (x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (wd.shape[1],):
            raise ValueError(f"linear: bias shape {bias.shape} != ({wd.shape[1]},)")
        out = out + bias.data
        inputs = (x, weight, bias)

    def backward(g):
        g2 = g.reshape(-1, g.shape[-1])
        gx = g @ wd.T
        gw = xd.reshape(-1, xd.shape[-1]).T @ g2
        if bias is None:
            return gx, gw
        return gx, gw, g2.sum(axis=0)

    return _emit("linear", out, inputs, backward)


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)
    return _emit("tanh", y, (x,), lambda g: (g * (1.0 - y * y),))


def gelu(x) -> Tensor:
    """Tanh-approximated GELU."""
    x = as_tensor(x)
    shape = x.shape
    x2 = np.ascontiguousarray(x.data.reshape(-1, shape[-1]))
    y = kernels.gelu_forward(x2).reshape(shape)
    return _emit("gelu", y, (x,), lambda g: (kernels.gelu_backward(np.ascontiguousarray(g.reshape(x2.shape)), x2).reshape(shape),))


def layer_norm(x, gain, bias, eps: float = 1e-12) -> Tensor:
    """Standardize each row over the trailing axis (population variance), then scale and shift."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ValueError(f"layer_norm: trailing dim {d} vs gain {gain.shape}, bias {bias.shape}")
    shape = x.shape
    x2 = np.ascontiguousarray(x.data.reshape(-1, d))
    y, xhat, rstd = kernels.layer_norm_forward(x2, gain.data, bias.data, float(eps))

    def backward(g):
        dx, dgain, dbias = kernels.layer_norm_backward(np.ascontiguousarray(g.reshape(-1, d)), xhat, rstd, gain.data)
        return dx.reshape(shape), dgain, dbias

    return _emit("layer_norm", y.reshape(shape), (x, gain, bias), backward)


def softmax(x) -> Tensor:
    x = as_tensor(x)
    shape = x.shape
    y = kernels.softmax_forward(np.ascontiguousarray(x.data.reshape(-1, shape[-1])))

    def backward(g):
        return (kernels.softmax_backward(np.ascontiguousarray(g.reshape(y.shape)), y).reshape(shape),)

    return _emit("softmax", y.reshape(shape), (x,), backward)


MASKED_SCORE = -1e9


def attention(q, k, v, num_heads: int, key_mask=None) -> Tensor:
    """Multi-head scaled dot-product attention on (batch, seq, d) inputs.

    ``key_mask`` is a boolean (batch, seq) array, True where a key may be
    attended to.  Heads are split from and merged back into the last axis.
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    if not (q.shape == k.shape == v.shape) or q.ndim != 3:
        raise ValueError(f"attention: q/k/v shapes must match (batch, seq, d): {q.shape}, {k.shape}, {v.shape}")
    b, s, d = q.shape
    if d % num_heads:
        raise ValueError(f"attention: model dim {d} not divisible by {num_heads} heads")
    dh = d // num_heads
    inv = 1.0 / np.sqrt(dh)

    def split(t):
        return t.reshape(b, s, num_heads, dh).transpose(0, 2, 1, 3)

    qh, kh, vh = split(q.data), split(k.data), split(v.data)
    scores = (qh @ kh.transpose(0, 1, 3, 2)) * inv
    if key_mask is not None:
        scores = scores + np.where(np.asarray(key_mask, dtype=bool), 0.0, MASKED_SCORE)[:, None, None, :]
    probs = kernels.softmax_forward(np.ascontiguousarray(scores.reshape(-1, s))).reshape(scores.shape)
    ctx = probs @ vh
    out = ctx.transpose(0, 2, 1, 3).reshape(b, s, d)

    def backward(g):
        gctx = g.reshape(b, s, num_heads, dh).transpose(0, 2, 1, 3)
        gprobs = gctx @ vh.transpose(0, 1, 3, 2)
        gv = probs.transpose(0, 1, 3, 2) @ gctx
        gscores = kernels.softmax_backward(
            np.ascontiguousarray(gprobs.reshape(-1, s)), np.ascontiguousarray(probs.reshape(-1, s))
        ).reshape(scores.shape) * inv
        gq = gscores @ kh
        gk = gscores.transpose(0, 1, 3, 2) @ qh

        def merge(t):
            return t.transpose(0, 2, 1, 3).reshape(b, s, d)

        return merge(gq), merge(gk), merge(gv)

    return _emit("attention", out, (q, k, v), backward)


def embedding(table, ids) -> Tensor:
    """Row lookup ``table[ids]`` for an integer array of any shape."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    n = table.shape[0]
    bad = np.argwhere((ids < 0) | (ids >= n))
    if bad.size:
        pos = tuple(int(i) for i in bad[0])
        raise IndexError(f"embedding: id {int(ids[pos])} at position {pos} outside [0, {n})")
    flat = ids.reshape(-1)

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, flat, g.reshape(-1, table.shape[1]))
        return (gt,)

    return _emit("embedding", table.data[ids], (table,), backward)


def take_rows(x, index) -> Tensor:
    """Gather rows from ``x`` viewed as a (-1, d) matrix."""
    x = as_tensor(x)
    shape = x.shape
    d = shape[-1]
    index = np.asarray(index, dtype=np.int64)
    x2 = x.data.reshape(-1, d)

    def backward(g):
        gx = np.zeros_like(x2)
        np.add.at(gx, index, g)
        return (gx.reshape(shape),)

    return _emit("take_rows", x2[index], (x,), backward)


def select(x, key) -> Tensor:
    """Basic (slice/integer) indexing, e.g. ``select(h, (slice(None), 0))``."""
    x = as_tensor(x)
    shape = x.shape

    def backward(g):
        gx = np.zeros(shape)
        gx[key] = g
        return (gx,)

    return _emit("select", np.array(x.data[key]), (x,), backward)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    old = x.shape
    return _emit("reshape", x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def dropout(x, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; callers skip it entirely outside training."""
    x = as_tensor(x)
    if rate <= 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _emit("dropout", x.data * keep, (x,), lambda g: (g * keep,))


def sum(x) -> Tensor:  # noqa: A001 - mirrors numpy naming
    x = as_tensor(x)
    shape = x.shape
    return _emit("sum", np.array(x.data.sum()), (x,), lambda g: (np.full(shape, float(g)),))


def mean(x) -> Tensor:
    x = as_tensor(x)
    shape, n = x.shape, x.size
    return _emit("mean", np.array(x.data.mean()), (x,), lambda g: (np.full(shape, float(g) / n),))


def cross_entropy(logits, targets) -> Tensor:
    """Mean softmax cross-entropy of (n, classes) logits against integer targets."""
    logits = as_tensor(logits)
    if logits.ndim != 2:
        raise ValueError(f"cross_entropy: expected (n, classes) logits, got {logits.shape}")
    targets = np.ascontiguousarray(targets, dtype=np.int64)
    if targets.shape != (logits.shape[0],):
        raise ValueError(f"cross_entropy: {targets.shape[0] if targets.ndim else 0} targets for {logits.shape[0]} rows")
    if targets.size == 0:
        raise ValueError("cross_entropy: no targets")
    if targets.min() < 0 or targets.max() >= logits.shape[1]:
        raise IndexError(f"cross_entropy: target outside [0, {logits.shape[1]})")
    loss, probs = kernels.cross_entropy_forward(np.ascontiguousarray(logits.data), targets)

    def backward(g):
        return (kernels.cross_entropy_backward(float(g), probs, targets),)

    return _emit("cross_entropy", np.array(loss), (logits,), backward)
