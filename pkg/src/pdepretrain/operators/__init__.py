from .base import (
    DEFAULT_HPARAMS,
    FAMILIES,
    PARAM_TARGETS,
    ModelConfig,
    OperatorModel,
    count_parameters,
    grid_coordinates,
)
from .heads import TASK_HEADS, PretextModel, ProjectionHead, attach_head, detach_head
from .registry import build_model, load_checkpoint, save_checkpoint

__all__ = [
    "DEFAULT_HPARAMS", "FAMILIES", "PARAM_TARGETS", "TASK_HEADS", "ModelConfig", "OperatorModel",
    "PretextModel", "ProjectionHead", "attach_head", "build_model", "count_parameters",
    "detach_head", "grid_coordinates", "load_checkpoint", "save_checkpoint",
]
