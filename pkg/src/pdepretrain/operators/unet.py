"""U-Net of ConvNeXt blocks with self-attention at the bottleneck."""
from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .base import ModelConfig, OperatorModel


class ConvNextBlock(nn.Module):
    def __init__(self, in_ch, out_ch, expand=4):
        super().__init__()
        self.dw = nn.Conv2d(in_ch, in_ch, 7, padding=3, groups=in_ch, padding_mode="circular")
        self.norm = nn.GroupNorm(1, in_ch)
        self.pw1 = nn.Conv2d(in_ch, expand * out_ch, 1)
        self.pw2 = nn.Conv2d(expand * out_ch, out_ch, 1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x):
        h = self.pw2(F.gelu(self.pw1(self.norm(self.dw(x)))))
        return self.skip(x) + h


class AttentionBlock(nn.Module):
    def __init__(self, ch, heads=4):
        super().__init__()
        self.norm = nn.GroupNorm(1, ch)
        self.attn = nn.MultiheadAttention(ch, heads, batch_first=True)

    def forward(self, x):
        b, c, nx, ny = x.shape
        h = self.norm(x).flatten(2).transpose(1, 2)
        h, _ = self.attn(h, h, h, need_weights=False)
        return x + h.transpose(1, 2).reshape(b, c, nx, ny)


class Unet(OperatorModel):
    """``n_blocks`` is the number of ConvNeXt blocks on each level of the down
    and up paths; channels are ``hidden * dim_mults``."""

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        hp = config.hparams
        chans = [hp["hidden"] * m for m in hp["dim_mults"]]
        nb = hp["n_blocks"]
        self.stem = nn.Conv2d(config.in_frames, chans[0], 3, padding=1, padding_mode="circular")
        self.down = nn.ModuleList()
        self.downsample = nn.ModuleList()
        prev = chans[0]
        for i, ch in enumerate(chans):
            self.down.append(nn.ModuleList(ConvNextBlock(prev if j == 0 else ch, ch) for j in range(nb)))
            prev = ch
            if i < len(chans) - 1:
                self.downsample.append(nn.Conv2d(ch, ch, 2, stride=2))
        self.mid1 = ConvNextBlock(prev, prev)
        self.mid_attn = AttentionBlock(prev)
        self.mid2 = ConvNextBlock(prev, prev)
        self.up = nn.ModuleList()
        self.upsample = nn.ModuleList()
        for i, ch in reversed(list(enumerate(chans))):
            self.up.append(nn.ModuleList(ConvNextBlock(prev + ch if j == 0 else ch, ch) for j in range(nb)))
            prev = ch
            if i > 0:
                self.upsample.append(nn.ConvTranspose2d(ch, chans[i - 1], 2, stride=2))
                prev = chans[i - 1]
        self.head = nn.Sequential(nn.GroupNorm(1, chans[0]), nn.Conv2d(chans[0], config.out_frames, 1))
        self.n_levels = len(chans)

    def _forward(self, x, t0):
        factor = 2 ** (self.n_levels - 1)
        if x.shape[-1] % factor or x.shape[-2] % factor:
            raise ValueError(f"grid must be divisible by {factor}")
        h = self.stem(x)
        skips = []
        for i, blocks in enumerate(self.down):
            for blk in blocks:
                h = blk(h)
            skips.append(h)
            if i < len(self.downsample):
                h = self.downsample[i](h)
        h = self.mid2(self.mid_attn(self.mid1(h)))
        for i, blocks in enumerate(self.up):
            h = torch.cat([h, skips.pop()], dim=1)
            for blk in blocks:
                h = blk(h)
            if i < len(self.upsample):
                h = self.upsample[i](h)
        return self.head(h)
