from __future__ import annotations

from dataclasses import asdict, dataclass, field

from ..augment import AugmentationSpec
from ..exceptions import ConfigError

PRETEXT_STRATEGIES = ("binary", "timesort", "spacesort", "jigsaw", "coefficient", "derivative", "masked", "picl")
STRATEGIES = ("none", "transfer") + PRETEXT_STRATEGIES
TASKS = ("fixed_future", "autoregressive")
POOL_SIZE = 1024
FINETUNE_SIZES = (100, 250, 500, 1000)


@dataclass(frozen=True)
class RolloutSpec:
    window: int = 8
    horizon: tuple[int, int] = (8, 32)
    pushforward: bool = True
    fixed_future_target_frame: int = 31

    def __post_init__(self):
        span = self.horizon[1] - self.horizon[0]
        if span <= 0 or span % self.window:
            raise ConfigError(f"window {self.window} does not tile the horizon {self.horizon}")

    @property
    def n_steps(self) -> int:
        return (self.horizon[1] - self.horizon[0]) // self.window


@dataclass
class TrainSpec:
    phase: str = "finetune"
    strategy: str = "none"
    task: str = "autoregressive"
    augmentation: AugmentationSpec = field(default_factory=AugmentationSpec)
    epochs: int | None = None
    batch_size: int = 32
    lr: float = 1e-3
    weight_decay: float = 1e-6
    scheduler: str | None = None
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    n_samples: int = 500
    tau: float = 1.0
    mask_ratio: float = 0.75
    jigsaw_k: int = 1000
    normalize_coefficients: bool = False
    rollout: RolloutSpec = field(default_factory=RolloutSpec)

    def __post_init__(self):
        if self.phase not in ("pretrain", "finetune"):
            raise ConfigError(f"phase must be 'pretrain' or 'finetune', got {self.phase!r}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if not 0 < self.n_samples <= POOL_SIZE:
            raise ConfigError(f"n_samples must lie in [1, {POOL_SIZE}]")
        if self.epochs is None:
            if self.phase == "pretrain" and self.strategy == "binary":
                self.epochs = 100
            else:
                self.epochs = 200
        if self.scheduler is None:
            self.scheduler = "one_cycle" if self.phase == "pretrain" else "cosine_annealing"
        if self.scheduler not in ("one_cycle", "cosine_annealing", "constant"):
            raise ConfigError(f"unknown scheduler {self.scheduler!r}")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        self.seeds = tuple(int(s) for s in self.seeds)

    @property
    def out_frames(self) -> int:
        return 1 if self.task == "fixed_future" else self.rollout.window

    def to_dict(self):
        return asdict(self)
