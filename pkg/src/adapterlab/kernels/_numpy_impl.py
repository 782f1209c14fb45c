"""Pure-numpy reference kernels.

Every function here has a twin in ``_numba_impl`` with the same signature and
the same arithmetic, up to summation order.  Inputs are 2-D, C-contiguous
float64 arrays; row-wise operations reduce over the last axis.
"""

import numpy as np

GELU_C = np.sqrt(2.0 / np.pi)
GELU_A = 0.044715
VARIANCE_FLOOR = 1e-12


def layer_norm_forward(x, gain, bias, eps):
    mean = x.mean(axis=1, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = centered * rstd
    return xhat * gain + bias, xhat, rstd[:, 0]


def layer_norm_backward(grad, xhat, rstd, gain):
    dgain = (grad * xhat).sum(axis=0)
    dbias = grad.sum(axis=0)
    dxhat = grad * gain
    m1 = dxhat.mean(axis=1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=1, keepdims=True)
    dx = (dxhat - m1 - xhat * m2) * rstd[:, None]
    return dx, dgain, dbias


def softmax_forward(x):
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_backward(grad, y):
    dot = (grad * y).sum(axis=1, keepdims=True)
    return y * (grad - dot)


def gelu_forward(x):
    t = np.tanh(GELU_C * (x + GELU_A * x**3))
    return 0.5 * x * (1.0 + t)


def gelu_backward(grad, x):
    t = np.tanh(GELU_C * (x + GELU_A * x**3))
    dt = (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
    return grad * (0.5 * (1.0 + t) + 0.5 * x * dt)


def cross_entropy_forward(logits, targets):
    """Mean negative log-likelihood and the softmax probabilities."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(logits.shape[0])
    nll = lse - shifted[rows, targets]
    probs = np.exp(shifted - lse[:, None])
    return nll.mean(), probs


def cross_entropy_backward(grad, probs, targets):
    n = probs.shape[0]
    out = probs.copy()
    out[np.arange(n), targets] -= 1.0
    return out * (grad / n)


def upper_triangle_pearson(a, b):
    """Pearson correlation of the strict upper triangles of two square matrices.

    Returns ``nan`` when either triangle has zero variance (a per-entry
    spread below ``VARIANCE_FLOOR``, which absorbs rounding in the mean).
    """
    mask = np.triu(np.ones(a.shape, dtype=bool), k=1)
    x = a[mask]
    y = b[mask]
    x = x - x.mean()
    y = y - y.mean()
    sxx = np.dot(x, x)
    syy = np.dot(y, y)
    floor = x.size * VARIANCE_FLOOR**2
    if sxx <= floor or syy <= floor:
        return np.nan
    r = np.dot(x, y) / np.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))
