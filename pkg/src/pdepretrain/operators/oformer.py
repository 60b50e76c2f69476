"""Operator transformer: Galerkin-attention encoder over grid points and a
cross-attention decoder whose latent is stepped forward by an MLP."""
from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .base import ModelConfig, OperatorModel, grid_coordinates


class GalerkinAttention(nn.Module):
    """Softmax-free linear attention Q (LN(K)^T LN(V)) / N, per head."""

    def __init__(self, dim, heads):
        super().__init__()
        if dim % heads:
            raise ValueError("hidden dim must be divisible by heads")
        self.heads = heads
        self.dh = dim // heads
        self.q = nn.Linear(dim, dim, bias=False)
        self.k = nn.Linear(dim, dim, bias=False)
        self.v = nn.Linear(dim, dim, bias=False)
        self.k_norm = nn.LayerNorm(self.dh)
        self.v_norm = nn.LayerNorm(self.dh)
        self.out = nn.Linear(dim, dim)

    def _split(self, t):
        b, n, _ = t.shape
        return t.view(b, n, self.heads, self.dh).transpose(1, 2)

    def forward(self, query, context=None):
        context = query if context is None else context
        q = self._split(self.q(query))
        k = self.k_norm(self._split(self.k(context)))
        v = self.v_norm(self._split(self.v(context)))
        kv = k.transpose(-2, -1) @ v / context.shape[1]
        out = (q @ kv).transpose(1, 2).reshape(query.shape)
        return self.out(out)


class FeedForward(nn.Module):
    def __init__(self, dim, mult=4):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(dim, dim * mult), nn.GELU(), nn.Linear(dim * mult, dim))

    def forward(self, x):
        return self.net(x)


class EncoderLayer(nn.Module):
    def __init__(self, dim, heads):
        super().__init__()
        self.attn = GalerkinAttention(dim, heads)
        self.ff = FeedForward(dim)
        self.norm = nn.LayerNorm(dim)

    def forward(self, h):
        h = h + self.attn(h)
        return h + self.ff(self.norm(h))


class OFormer(OperatorModel):
    def __init__(self, config: ModelConfig):
        super().__init__(config)
        hp = config.hparams
        dim, latent = hp["hidden"], hp["latent"]
        self.embed = nn.Sequential(nn.Linear(config.in_frames + 2, dim), nn.GELU(), nn.Linear(dim, dim))
        self.encoder = nn.ModuleList(EncoderLayer(dim, hp["heads"]) for _ in range(hp["encoder_depth"]))
        self.to_latent = nn.Linear(dim, latent)
        self.query = nn.Sequential(nn.Linear(2, latent), nn.GELU(), nn.Linear(latent, latent))
        self.cross = nn.ModuleList(GalerkinAttention(latent, hp["heads"]) for _ in range(hp["decoder_depth"]))
        self.cross_ff = nn.ModuleList(FeedForward(latent) for _ in range(hp["decoder_depth"]))
        self.propagate = nn.Sequential(nn.Linear(latent, 4 * latent), nn.GELU(),
                                       nn.Linear(4 * latent, 4 * latent), nn.GELU(),
                                       nn.Linear(4 * latent, latent))
        self.decode = nn.Sequential(nn.Linear(latent, 2 * latent), nn.GELU(),
                                    nn.Linear(2 * latent, latent), nn.GELU(), nn.Linear(latent, 1))

    def _forward(self, x, t0):
        b, c, nx, ny = x.shape
        coords = grid_coordinates(nx, ny, x.device, x.dtype).flatten(1).T      # [N, 2]
        tokens = torch.cat([x.flatten(2).transpose(1, 2), coords.expand(b, -1, -1)], dim=-1)
        h = self.embed(tokens)
        for layer in self.encoder:
            h = layer(h)
        ctx = self.to_latent(h)
        z = self.query(coords).expand(b, -1, -1)
        for attn, ff in zip(self.cross, self.cross_ff):
            z = z + attn(z, ctx)
            z = z + ff(F.layer_norm(z, z.shape[-1:]))
        frames = []
        for _ in range(self.out_frames):
            z = z + self.propagate(z)
            frames.append(self.decode(z))
        return torch.cat(frames, dim=-1).transpose(1, 2).reshape(b, self.out_frames, nx, ny)
