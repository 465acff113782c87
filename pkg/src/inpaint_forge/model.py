"""Conditional denoiser: a small attention-free UNet predicting the clean image.

Inputs (noisy image, masked observation, mask) are concatenated channel-wise
before the first convolution; the timestep enters as a sinusoidal embedding
mapped to a per-channel bias at every scale. Channel widths are capped at 32,
which keeps the default RGB model around 160k parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    image_channels: int = 3
    widths: tuple = (16, 32, 32, 32)  # per scale, finest first
    time_dim: int = 64
    time_hidden: int = 64

    @property
    def in_channels(self):
        # x_t (C) + y (C) + mask (1)
        return 2 * self.image_channels + 1

    @property
    def depth(self):
        return len(self.widths)

    @property
    def size_multiple(self):
        return 2 ** (self.depth - 1)


def sinusoidal_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Standard sin/cos positional embedding of integer timesteps, shape (B, dim)."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=t.dtype, device=t.device) / (half - 1)
    )
    args = t[:, None] * freqs[None, :]
    return torch.cat([torch.sin(args), torch.cos(args)], dim=1)


def _norm(ch):
    return nn.GroupNorm(min(8, ch), ch)


class ConvBlock(nn.Module):
    """Two 3x3 convs with group norm and SiLU; timestep bias after the first conv."""

    def __init__(self, in_ch, out_ch, time_hidden):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.norm1 = _norm(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.norm2 = _norm(out_ch)
        self.time_proj = nn.Linear(time_hidden, out_ch)

    def forward(self, x, temb):
        h = self.conv1(x)
        h = h + self.time_proj(temb)[:, :, None, None]
        h = F.silu(self.norm1(h))
        h = F.silu(self.norm2(self.conv2(h)))
        return h


class DenoiserModel(nn.Module):
    """f(x_t, y, mask, t) -> predicted clean image, same shape as x_t."""

    def __init__(self, config: ModelConfig = ModelConfig()):
        super().__init__()
        self.config = config
        w = config.widths
        th = config.time_hidden
        self.time_mlp = nn.Sequential(
            nn.Linear(config.time_dim, th), nn.SiLU(), nn.Linear(th, th)
        )
        self.enc = nn.ModuleList()
        in_ch = config.in_channels
        for width in w:
            self.enc.append(ConvBlock(in_ch, width, th))
            in_ch = width
        self.up = nn.ModuleList()
        self.dec = nn.ModuleList()
        for i in reversed(range(len(w) - 1)):
            self.up.append(nn.Conv2d(w[i + 1], w[i], 3, padding=1))
            self.dec.append(ConvBlock(2 * w[i], w[i], th))
        self.out = nn.Conv2d(w[0], config.image_channels, 3, padding=1)

    def forward(self, x_t, y, mask, t):
        cfg = self.config
        if x_t.shape != y.shape:
            raise ModelError(f"x_t {tuple(x_t.shape)} and y {tuple(y.shape)} differ")
        if x_t.shape[1] != cfg.image_channels:
            raise ModelError(
                f"model expects {cfg.image_channels} image channels, got {x_t.shape[1]}"
            )
        if mask.dim() == 3:
            mask = mask[:, None, :, :]
        h_, w_ = x_t.shape[-2:]
        mult = cfg.size_multiple
        if h_ % mult or w_ % mult:
            raise ModelError(f"H and W must be multiples of {mult}, got {h_}x{w_}")
        if torch.is_tensor(t):
            t = t.to(dtype=x_t.dtype, device=x_t.device)
        else:
            t = torch.full((x_t.shape[0],), float(t), dtype=x_t.dtype, device=x_t.device)
        temb = self.time_mlp(sinusoidal_embedding(t, cfg.time_dim))

        h = torch.cat([x_t, y, mask.to(x_t.dtype)], dim=1)
        skips = []
        for i, block in enumerate(self.enc):
            if i > 0:
                h = F.avg_pool2d(h, 2)
            h = block(h, temb)
            skips.append(h)
        for up, block, skip in zip(self.up, self.dec, reversed(skips[:-1])):
            h = up(F.interpolate(h, scale_factor=2, mode="nearest"))
            h = block(torch.cat([h, skip], dim=1), temb)
        return self.out(h)


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters() if p.requires_grad)
