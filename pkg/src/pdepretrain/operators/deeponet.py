"""DeepONet with temporally bundled branch and trunk networks."""
from __future__ import annotations

import torch
from torch import nn

from .base import ModelConfig, OperatorModel, grid_coordinates


def mlp(sizes, act=nn.SiLU, last_act=False):
    layers = []
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        layers.append(nn.Linear(a, b))
        if i < len(sizes) - 2 or last_act:
            layers.append(act())
    return nn.Sequential(*layers)


class DeepONet(OperatorModel):
    """The branch sees the ``in_frames`` values at each query point, the trunk
    its (x, y) coordinate. Their features are split into ``out_frames`` groups
    and each group's inner product gives one output frame."""

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        hp = config.hparams
        p = hp["branch_size"]
        if hp["trunk_size"] != p:
            raise ValueError("branch and trunk sizes must match")
        if p % config.out_frames:
            raise ValueError(f"feature size {p} is not divisible by out_frames={config.out_frames}")
        self.branch = mlp([config.in_frames] + [p] * hp["branch_layers"])
        self.trunk = mlp([2] + [p] * hp["trunk_layers"], last_act=True)
        self.bias = nn.Parameter(torch.zeros(config.out_frames))

    def _forward(self, x, t0):
        b, c, nx, ny = x.shape
        branch = self.branch(x.permute(0, 2, 3, 1))                      # [B, nx, ny, p]
        coords = grid_coordinates(nx, ny, x.device, x.dtype).permute(1, 2, 0)
        trunk = self.trunk(coords)                                       # [nx, ny, p]
        prod = (branch * trunk).reshape(b, nx, ny, self.out_frames, -1).sum(-1)
        return prod.permute(0, 3, 1, 2) + self.bias.view(1, -1, 1, 1)
