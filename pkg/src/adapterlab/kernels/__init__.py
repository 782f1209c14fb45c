"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import time.  Set ``ADAPTERLAB_NUMBA=0`` to force
the numpy path; it is also used automatically when numba cannot be imported.
Both backends are importable directly (``numpy_kernels``, ``numba_kernels``)
for benchmarking and cross-checking.
"""

import os

from . import _numpy_impl as numpy_kernels

_NAMES = (
    "layer_norm_forward",
    "layer_norm_backward",
    "softmax_forward",
    "softmax_backward",
    "gelu_forward",
    "gelu_backward",
    "cross_entropy_forward",
    "cross_entropy_backward",
    "upper_triangle_pearson",
)

try:
    from . import _numba_impl as numba_kernels
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba_kernels = None


def _wanted():
    flag = os.environ.get("ADAPTERLAB_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


if numba_kernels is not None and _wanted():
    BACKEND = "numba"
    _impl = numba_kernels
else:
    BACKEND = "numpy"
    _impl = numpy_kernels

layer_norm_forward = _impl.layer_norm_forward
layer_norm_backward = _impl.layer_norm_backward
softmax_forward = _impl.softmax_forward
softmax_backward = _impl.softmax_backward
gelu_forward = _impl.gelu_forward
gelu_backward = _impl.gelu_backward
cross_entropy_forward = _impl.cross_entropy_forward
cross_entropy_backward = _impl.cross_entropy_backward
upper_triangle_pearson = _impl.upper_triangle_pearson

__all__ = ["BACKEND", "numpy_kernels", "numba_kernels", *_NAMES]
