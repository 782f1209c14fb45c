from . import ops
from .core import NonFiniteError, Node, Parameter, Tape, Tensor, active_tape, backward
from .gradcheck import NondeterministicFunctionError, gradient_check, relative_error
from .ops import as_tensor, layer_norm, matmul

__all__ = [
    "NonFiniteError",
    "NondeterministicFunctionError",
    "Node",
    "Parameter",
    "Tape",
    "Tensor",
    "active_tape",
    "as_tensor",
    "backward",
    "gradient_check",
    "layer_norm",
    "matmul",
    "ops",
    "relative_error",
]
