"""Adapter-based tuning versus full fine-tuning on a numpy transformer encoder."""

from .config import AdapterConfig, AdapterTuning, FullFineTune, MixoutConfig, TransformerConfig, TuningPolicy
from .model import EncoderModel, apply_tuning_policy, count_parameters, encoder_forward

__version__ = "0.1.0"

__all__ = [
    "AdapterConfig",
    "AdapterTuning",
    "EncoderModel",
    "FullFineTune",
    "MixoutConfig",
    "TransformerConfig",
    "TuningPolicy",
    "apply_tuning_policy",
    "count_parameters",
    "encoder_forward",
]
