"""Lightweight CNN projection heads used only while pretraining."""
from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from ..exceptions import ShapeError
from .base import OperatorModel

N_WINDOWS = 4
POOL_GRID = 2

# strategy -> (head kind, output size, input layout)
# "windows": the backbone runs on each 8-frame window of the 32-frame sample
# and the outputs are stacked as channels; "window": one 8-frame window
TASK_HEADS = {
    "binary": ("classifier", 1, "windows"),
    "timesort": ("classifier", 24, "windows"),
    "spacesort": ("classifier", 24, "windows"),
    "jigsaw": ("classifier", 1000, "windows"),
    "coefficient": ("regressor", 3, "window"),
    "derivative": ("upsampler", 5 * 8, "window"),
    "masked": ("upsampler", 32, "windows"),
}


class ProjectionHead(nn.Module):
    """Two stride-2 convolutions, then either a flattened 2x2 grid + linear
    (classifier, regressor) or two stride-2 transposed convolutions (upsampler).

    The grid keeps where features sit (jigsaw and spacesort labels depend on
    it) while staying independent of the input resolution.

    The input is batch-normalized first: at initialization backbone outputs are
    dominated by the coordinate channels and vary across samples by ~1e-4.
    """

    def __init__(self, kind, in_ch, n_out, width=(8, 16)):
        super().__init__()
        if kind not in ("classifier", "regressor", "upsampler"):
            raise ValueError(f"unknown head kind {kind!r}")
        self.kind = kind
        self.n_out = n_out
        w1, w2 = width if kind != "upsampler" else (16, 16)
        self.norm = nn.BatchNorm2d(in_ch)
        self.down1 = nn.Conv2d(in_ch, w1, 3, stride=2, padding=1)
        self.down2 = nn.Conv2d(w1, w2, 3, stride=2, padding=1)
        if kind == "upsampler":
            self.up1 = nn.ConvTranspose2d(w2, w2, 4, stride=2, padding=1)
            self.up2 = nn.ConvTranspose2d(w2, n_out, 4, stride=2, padding=1)
        else:
            self.pool = nn.AdaptiveAvgPool2d(POOL_GRID)
            self.fc = nn.Linear(w2 * POOL_GRID ** 2, n_out)

    def forward(self, h):
        shape = h.shape[-2:]
        z = F.gelu(self.down2(F.gelu(self.down1(self.norm(h)))))
        if self.kind == "upsampler":
            out = self.up2(F.gelu(self.up1(z)))
            if out.shape[-2:] != shape:
                raise ShapeError(f"upsampler produced {tuple(out.shape[-2:])}, expected {tuple(shape)}")
            return out
        out = self.fc(self.pool(z).flatten(1))
        return out.squeeze(-1) if self.n_out == 1 else out


class PretextModel(nn.Module):
    """Backbone plus head; ``layout`` decides how 32-frame inputs are fed."""

    def __init__(self, backbone: OperatorModel, head: ProjectionHead, task: str, layout: str):
        super().__init__()
        self.backbone = backbone
        self.head = head
        self.task = task
        self.layout = layout

    def backbone_features(self, x):
        if self.layout == "window":
            return self.backbone(x)
        w = self.backbone.in_frames
        if x.shape[1] != N_WINDOWS * w:
            raise ShapeError(f"expected {N_WINDOWS * w} frames, got {x.shape[1]}")
        b = x.shape[0]
        # fold the windows into the batch so every window shares one pass
        windows = x.reshape(b * N_WINDOWS, w, *x.shape[2:])
        t0 = torch.arange(N_WINDOWS, device=x.device).repeat(b) * w
        out = self.backbone(windows, t0)
        return out.reshape(b, N_WINDOWS * out.shape[1], *out.shape[2:])

    def forward(self, x):
        return self.head(self.backbone_features(x))


def attach_head(model: OperatorModel, task: str, n_out: int | None = None) -> PretextModel:
    if task not in TASK_HEADS:
        raise ValueError(f"task {task!r} has no projection head")
    kind, default_out, layout = TASK_HEADS[task]
    n_out = default_out if n_out is None else n_out
    in_ch = model.out_frames * (N_WINDOWS if layout == "windows" else 1)
    return PretextModel(model, ProjectionHead(kind, in_ch, n_out), task, layout)


def detach_head(model) -> OperatorModel:
    return model.backbone if isinstance(model, PretextModel) else model


def check_head_output(out, labels):
    if tuple(out.shape) != tuple(labels.shape):
        raise ShapeError(f"head output {tuple(out.shape)} does not match labels {tuple(labels.shape)}")
