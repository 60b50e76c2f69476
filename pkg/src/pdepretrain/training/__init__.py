from .estimators import NeuralOperatorRegressor, PretextPretrainer
from .losses import relative_l2, relative_l2_per_sample
from .loops import (
    PretrainResult,
    evaluate,
    finetune,
    finetune_autoregressive,
    finetune_fixed_future,
    prediction_loss,
    pretrain,
    rollout,
    seeded_subset,
)
from .records import MetricRecord, append_record, read_records
from .spec import FINETUNE_SIZES, PRETEXT_STRATEGIES, STRATEGIES, TASKS, RolloutSpec, TrainSpec

__all__ = [
    "FINETUNE_SIZES", "MetricRecord", "NeuralOperatorRegressor", "PRETEXT_STRATEGIES",
    "PretextPretrainer", "PretrainResult", "RolloutSpec", "STRATEGIES", "TASKS", "TrainSpec",
    "append_record", "evaluate", "finetune", "finetune_autoregressive", "finetune_fixed_future",
    "prediction_loss", "pretrain", "read_records", "relative_l2", "relative_l2_per_sample",
    "rollout", "seeded_subset",
]
