"""Fourier neural operator with x, y and time coordinate channels."""
from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .base import ModelConfig, OperatorModel, grid_coordinates


class SpectralConv2d(nn.Module):
    """Multiply the lowest ``modes`` Fourier modes per axis by learned complex weights."""

    def __init__(self, in_ch, out_ch, modes):
        super().__init__()
        self.modes = modes
        scale = 1.0 / (in_ch * out_ch)
        self.w_pos = nn.Parameter(scale * torch.rand(in_ch, out_ch, modes, modes, dtype=torch.cfloat))
        self.w_neg = nn.Parameter(scale * torch.rand(in_ch, out_ch, modes, modes, dtype=torch.cfloat))

    def forward(self, x):
        b, _, nx, ny = x.shape
        m = self.modes
        if 2 * m > nx or m > ny // 2 + 1:
            raise ValueError(f"{m} modes do not fit a {nx}x{ny} grid")
        x_ft = torch.fft.rfft2(x)
        w_pos, w_neg = self.w_pos.to(x_ft.dtype), self.w_neg.to(x_ft.dtype)
        out = torch.zeros(b, w_pos.shape[1], nx, ny // 2 + 1, dtype=x_ft.dtype, device=x.device)
        out[:, :, :m, :m] = torch.einsum("bixy,ioxy->boxy", x_ft[:, :, :m, :m], w_pos)
        out[:, :, -m:, :m] = torch.einsum("bixy,ioxy->boxy", x_ft[:, :, -m:, :m], w_neg)
        return torch.fft.irfft2(out, s=(nx, ny))


class FNO(OperatorModel):
    def __init__(self, config: ModelConfig):
        super().__init__(config)
        hp = config.hparams
        width = hp["width"]
        self.lift = nn.Conv2d(config.in_frames + 3, width, 1)
        self.spectral = nn.ModuleList(SpectralConv2d(width, width, hp["modes"]) for _ in range(hp["n_layers"]))
        self.pointwise = nn.ModuleList(nn.Conv2d(width, width, 1) for _ in range(hp["n_layers"]))
        self.proj1 = nn.Conv2d(width, hp["proj_width"], 1)
        self.proj2 = nn.Conv2d(hp["proj_width"], config.out_frames, 1)

    def _inputs(self, x, t0):
        b, _, nx, ny = x.shape
        coords = grid_coordinates(nx, ny, x.device, x.dtype).expand(b, -1, -1, -1)
        t = torch.as_tensor(t0, dtype=x.dtype, device=x.device).reshape(-1, 1, 1, 1) / self.n_time_steps
        return torch.cat([x, coords, t.expand(b, 1, nx, ny)], dim=1)

    def _forward(self, x, t0):
        h = self.lift(self._inputs(x, t0))
        last = len(self.spectral) - 1
        for i, (spec, pw) in enumerate(zip(self.spectral, self.pointwise)):
            h = spec(h) + pw(h)
            if i < last:
                h = F.gelu(h)
        return self.proj2(F.gelu(self.proj1(h)))
