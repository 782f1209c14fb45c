from .deviation import DeviationReport, module_of, parameter_deviation
from .landscape import DEFAULT_GRID, LandscapeCurve, landscape_from_model, loss_landscape, split_loss
from .rsa import (
    RepresentationSet,
    RSAConfig,
    RSAResult,
    RSASampleWarning,
    collect_representations,
    compare,
    cosine_matrix,
    rsa_score,
    rsa_to_reference,
    sample_pairs,
)
from .snapshot import ModelSnapshot, as_snapshot, gather, scatter
from .sweep import DEFAULT_LRS, SweepCell, SweepResult, iqr, lr_sweep, quartiles, run_cell

__all__ = [
    "DEFAULT_GRID",
    "DEFAULT_LRS",
    "DeviationReport",
    "LandscapeCurve",
    "ModelSnapshot",
    "RSAConfig",
    "RSAResult",
    "RSASampleWarning",
    "RepresentationSet",
    "SweepCell",
    "SweepResult",
    "as_snapshot",
    "collect_representations",
    "compare",
    "cosine_matrix",
    "gather",
    "iqr",
    "landscape_from_model",
    "loss_landscape",
    "lr_sweep",
    "module_of",
    "parameter_deviation",
    "quartiles",
    "rsa_score",
    "rsa_to_reference",
    "run_cell",
    "sample_pairs",
    "scatter",
    "split_loss",
]
