"""Hierarchical stripe-attention encoder producing a three-level feature pyramid."""
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .attention import AttentionConfig, CSWinAttention
from .autograd.module import Conv2d, LayerNorm, Mlp, Module, map_to_tokens, tokens_to_map
from .autograd.tensor import add
from .errors import ConfigError, DimensionError


@dataclass
class EncoderConfig:
    in_channels: int = 3
    stage_depths: list = field(default_factory=lambda: [1, 2, 21])
    stage_channels: list = field(default_factory=lambda: [32, 64, 128])
    stage_heads: list = field(default_factory=lambda: [2, 4, 8])
    stripe_widths: list = field(default_factory=lambda: [1, 2, 4])
    mlp_ratio: float = 4.0

    def __post_init__(self):
        for name in ("stage_depths", "stage_channels", "stage_heads", "stripe_widths"):
            if len(getattr(self, name)) != 3:
                raise ConfigError(f"{name} needs exactly three stages")
        if any(d < 1 for d in self.stage_depths):
            raise ConfigError("stage depths must be positive")
        if any(b <= a for a, b in zip(self.stage_channels, self.stage_channels[1:])):
            raise ConfigError("stage channels must increase")

    def attention(self, stage):
        return AttentionConfig(self.stage_channels[stage], self.stage_heads[stage], self.stripe_widths[stage])


class FeaturePyramid(NamedTuple):
    """Token maps at 1/4, 1/8 and 1/16 resolution, each stored as (tokens, h, w)."""
    f1: tuple
    f2: tuple
    f3: tuple


class EncoderBlock(Module):
    def __init__(self, cfg, rng, mlp_ratio=4.0, dtype=np.float32):
        C = cfg.channels
        self.norm1 = LayerNorm(C, dtype=dtype)
        self.attn = CSWinAttention(cfg, rng, dtype=dtype)
        self.norm2 = LayerNorm(C, dtype=dtype)
        self.mlp = Mlp(C, int(C * mlp_ratio), rng, dtype=dtype)

    def forward(self, x, h, w):
        x_hat = add(self.attn(self.norm1(x), None, h, w), x)
        return add(self.mlp(self.norm2(x_hat)), x_hat)


class StageTransition(Module):
    """Stride-2 3x3 convolution: halves the token grid, widens channels."""

    def __init__(self, c_in, c_out, rng, dtype=np.float32):
        self.conv = Conv2d(c_in, c_out, 3, rng, stride=2, pad=1, dtype=dtype)

    def forward(self, x, h, w):
        if h % 2 or w % 2:
            raise DimensionError("stage_transition", (h, w), detail="spatial extent must be even")
        y = self.conv(tokens_to_map(x, h, w))
        return map_to_tokens(y), h // 2, w // 2


class Encoder(Module):
    def __init__(self, cfg, rng, dtype=np.float32):
        self.cfg = cfg
        ch = cfg.stage_channels
        self.patch_embed = Conv2d(cfg.in_channels, ch[0], 7, rng, stride=4, pad=3, dtype=dtype)
        self.embed_norm = LayerNorm(ch[0], dtype=dtype)
        self.stage1, self.stage2, self.stage3 = (
            [EncoderBlock(cfg.attention(s), rng, cfg.mlp_ratio, dtype=dtype) for _ in range(cfg.stage_depths[s])]
            for s in range(3)
        )
        self.down1 = StageTransition(ch[0], ch[1], rng, dtype=dtype)
        self.down2 = StageTransition(ch[1], ch[2], rng, dtype=dtype)

    def forward(self, image):
        if image.ndim != 4 or image.shape[1] != self.cfg.in_channels:
            raise DimensionError("encode", image.shape, detail=f"expected (B,{self.cfg.in_channels},H,W)")
        H, W = image.shape[2:]
        if H % 16 or W % 16:
            raise DimensionError("encode", image.shape, detail="H and W must be divisible by 16")
        x = self.embed_norm(map_to_tokens(self.patch_embed(image)))
        h, w = H // 4, W // 4
        outs = []
        for blocks, down in ((self.stage1, self.down1), (self.stage2, self.down2), (self.stage3, None)):
            for blk in blocks:
                x = blk(x, h, w)
            outs.append((x, h, w))
            if down is not None:
                x, h, w = down(x, h, w)
        return FeaturePyramid(*outs)


def encode(image, encoder):
    return encoder(image)
