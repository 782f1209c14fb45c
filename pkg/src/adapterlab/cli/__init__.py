from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .main import build_parser, main
from .runconfig import RunConfig

__all__ = ["CheckpointError", "RunConfig", "build_parser", "load_checkpoint", "main", "save_checkpoint"]
