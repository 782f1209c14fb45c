from ..config import AdapterTuning, FullFineTune, MixoutConfig, TuningPolicy
from ..mixout import mixout_effective_weight, mixout_weight
from .metrics import METRICS, UndefinedMetricWarning, compute_metric, confusion_matrix
from .optim import OptimizerState, adam_step, lr_at
from .tapt import mlm_eval_loss, tapt_pretrain
from .train import RunRecord, TrainConfig, evaluate, predict, select_checkpoint, train

__all__ = [
    "AdapterTuning",
    "FullFineTune",
    "METRICS",
    "MixoutConfig",
    "OptimizerState",
    "RunRecord",
    "TrainConfig",
    "TuningPolicy",
    "UndefinedMetricWarning",
    "adam_step",
    "compute_metric",
    "confusion_matrix",
    "evaluate",
    "lr_at",
    "mixout_effective_weight",
    "mixout_weight",
    "mlm_eval_loss",
    "predict",
    "select_checkpoint",
    "tapt_pretrain",
    "train",
]
