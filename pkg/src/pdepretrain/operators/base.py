"""Shared configuration, coordinate handling and output checks for the operators."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import torch
from torch import nn

from ..exceptions import ConfigError, NonFiniteError

FAMILIES = ("fno", "deeponet", "oformer", "unet")

DEFAULT_HPARAMS = {
    "fno": {"modes": 4, "width": 48, "n_layers": 4, "proj_width": 128},
    "deeponet": {"branch_size": 256, "trunk_size": 256, "branch_layers": 3, "trunk_layers": 3},
    "oformer": {"hidden": 32, "heads": 2, "encoder_depth": 2, "decoder_depth": 1, "latent": 32},
    "unet": {"hidden": 16, "n_blocks": 8, "dim_mults": (1, 2, 4)},
}

# parameter-count targets and tolerance used by the checks
PARAM_TARGETS = {"fno": 300_000, "deeponet": 250_000, "oformer": 70_000, "unet": 1_000_000}
PARAM_TOLERANCE = 0.10


@dataclass
class ModelConfig:
    family: str
    in_frames: int = 8
    out_frames: int = 8
    hparams: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown model family {self.family!r}; expected one of {FAMILIES}")
        if self.in_frames < 1 or self.out_frames < 1:
            raise ConfigError("in_frames and out_frames must be positive")
        merged = dict(DEFAULT_HPARAMS[self.family])
        unknown = set(self.hparams) - set(merged)
        if unknown:
            raise ConfigError(f"unknown {self.family} hyperparameters: {sorted(unknown)}")
        merged.update(self.hparams)
        for k, v in merged.items():
            vals = v if isinstance(v, (tuple, list)) else (v,)
            if any((not isinstance(x, int)) or x < 1 for x in vals):
                raise ConfigError(f"{self.family}.{k} must be a positive integer (got {v!r})")
        if "dim_mults" in merged:
            merged["dim_mults"] = tuple(merged["dim_mults"])
        self.hparams = merged

    def to_dict(self):
        d = asdict(self)
        d["hparams"] = {k: list(v) if isinstance(v, tuple) else v for k, v in self.hparams.items()}
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d["family"], d.get("in_frames", 8), d.get("out_frames", 8), dict(d.get("hparams", {})))


def grid_coordinates(n_x, n_y, device=None, dtype=torch.float32):
    """Normalized periodic coordinates in [0, 1), shape ``[2, n_x, n_y]``."""
    x = torch.arange(n_x, device=device, dtype=dtype) / n_x
    y = torch.arange(n_y, device=device, dtype=dtype) / n_y
    gx, gy = torch.meshgrid(x, y, indexing="ij")
    return torch.stack([gx, gy])


def check_finite(out, where="forward"):
    bad = ~torch.isfinite(out.detach()).flatten(1).all(dim=1)
    if bool(bad.any()):
        idx = torch.nonzero(bad).flatten().tolist()
        raise NonFiniteError(f"non-finite model output for batch indices {idx}", where={"stage": where, "batch_indices": idx})


class OperatorModel(nn.Module):
    """Maps ``[B, in_frames, n_x, n_y]`` to ``[B, out_frames, n_x, n_y]``.

    ``t0`` is the index of the first input frame, used by models that take a
    time coordinate. Set ``check_outputs`` to False to skip the finiteness scan.
    """

    n_time_steps = 32

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.check_outputs = True

    @property
    def in_frames(self):
        return self.config.in_frames

    @property
    def out_frames(self):
        return self.config.out_frames

    def forward(self, x, t0=0):
        if x.ndim != 4 or x.shape[1] != self.in_frames:
            raise ValueError(f"expected [B, {self.in_frames}, n_x, n_y], got {tuple(x.shape)}")
        out = self._forward(x, t0)
        if self.check_outputs:
            check_finite(out)
        return out

    def _forward(self, x, t0):  # pragma: no cover - abstract
        raise NotImplementedError


def count_parameters(module: nn.Module) -> int:
    # complex weights count once per element, the torch convention
    return sum(p.numel() for p in module.parameters())
