"""Two-branch (warp + generate) Transformer decoder, pixel-level fusion block and compositing."""
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .attention import AttentionConfig, CSWinAttention
from .autograd import functional as F
from .autograd.module import Conv2d, LayerNorm, Mlp, Module, map_to_tokens, tokens_to_map
from .autograd.tensor import Tensor, add, concat, mul, sub
from .errors import ConfigError, DimensionError


@dataclass
class DecoderConfig:
    """Stage lists run coarse to fine: index 0 is the 1/16 stage."""
    stage_depths: list = field(default_factory=lambda: [2, 4, 12])
    stage_channels: list = field(default_factory=lambda: [128, 64, 32])
    stage_heads: list = field(default_factory=lambda: [8, 4, 2])
    stripe_widths: list = field(default_factory=lambda: [4, 2, 1])
    mlp_ratio: float = 4.0
    dense_cross_attention: bool = False

    def __post_init__(self):
        for name in ("stage_depths", "stage_channels", "stage_heads", "stripe_widths"):
            if len(getattr(self, name)) != 3:
                raise ConfigError(f"{name} needs exactly three stages")
        if any(d < 1 for d in self.stage_depths):
            raise ConfigError("decoder stage depths must be positive")

    def attention(self, stage, dense=False):
        return AttentionConfig(self.stage_channels[stage], self.stage_heads[stage],
                               self.stripe_widths[stage], dense=dense)


class DecoderBlockOutput(NamedTuple):
    x: Tensor      # combined feature, tokens (B, h*w, C)
    flow: Tensor   # (B, 2, h, w) pixel offsets
    o_w: Tensor    # warping-branch output (B, C, h, w)
    o_g: Tensor    # generation-branch output (B, C, h, w)


class DecoderBlock(Module):
    def __init__(self, cfg, rng, mlp_ratio=4.0, dense_cross=False, dtype=np.float32):
        C = cfg.channels
        cross_cfg = AttentionConfig(C, cfg.num_heads, cfg.stripe_width, dense=dense_cross)
        self.norm1 = LayerNorm(C, dtype=dtype)
        self.self_attn = CSWinAttention(cfg, rng, dtype=dtype)
        self.warp_attn = CSWinAttention(cross_cfg, rng, dtype=dtype)
        self.flow_head = Conv2d(C, 2, 3, rng, zero_init=True, dtype=dtype)
        self.gen_attn = CSWinAttention(cross_cfg, rng, dtype=dtype)
        self.gen_conv = Conv2d(C, C, 3, rng, dtype=dtype)
        self.merge = Conv2d(2 * C, C, 1, rng, dtype=dtype)
        self.norm2 = LayerNorm(C, dtype=dtype)
        self.mlp = Mlp(C, int(C * mlp_ratio), rng, dtype=dtype)

    def forward(self, x_prev, s_feat, flow_in, h, w):
        if x_prev.shape != s_feat.shape:
            raise DimensionError("decoder_block", x_prev.shape, s_feat.shape)
        if flow_in.shape[1:] != (2, h, w):
            raise DimensionError("decoder_block", flow_in.shape, (2, h, w), detail="flow resolution")
        x_hat = add(self.self_attn(self.norm1(x_prev), None, h, w), x_prev)
        s_map = tokens_to_map(s_feat, h, w)

        residual = self.flow_head(tokens_to_map(self.warp_attn(x_hat, s_feat, h, w), h, w))
        flow = add(flow_in, residual)
        o_w = F.grid_sample_bilinear(s_map, flow)

        o_g = self.gen_conv(tokens_to_map(self.gen_attn(x_hat, s_feat, h, w), h, w))

        x_bar = map_to_tokens(self.merge(concat([o_w, o_g], axis=1)))
        x = add(self.mlp(self.norm2(x_hat)), x_bar)
        return DecoderBlockOutput(x, flow, o_w, o_g)


class UpTransition(Module):
    """Nearest x2 + 3x3 conv (narrowing channels), then 1x1 reduction of [feature, pose skip]."""

    def __init__(self, c_in, c_out, rng, dtype=np.float32):
        self.up_conv = Conv2d(c_in, c_out, 3, rng, dtype=dtype)
        self.reduce = Conv2d(2 * c_out, c_out, 1, rng, dtype=dtype)

    def forward(self, x, h, w, skip):
        y = self.up_conv(F.nearest_upsample_2x(tokens_to_map(x, h, w)))
        skip_map = tokens_to_map(*skip)
        if skip_map.shape != y.shape:
            raise DimensionError("decode.skip", y.shape, skip_map.shape)
        return map_to_tokens(self.reduce(concat([y, skip_map], axis=1))), 2 * h, 2 * w


class Decoder(Module):
    def __init__(self, cfg, rng, dtype=np.float32):
        self.cfg = cfg
        ch = cfg.stage_channels
        self.stage1, self.stage2, self.stage3 = (
            [DecoderBlock(cfg.attention(s), rng, cfg.mlp_ratio, cfg.dense_cross_attention, dtype=dtype)
             for _ in range(cfg.stage_depths[s])]
            for s in range(3)
        )
        self.up1 = UpTransition(ch[0], ch[1], rng, dtype=dtype)
        self.up2 = UpTransition(ch[1], ch[2], rng, dtype=dtype)

    def forward(self, src_pyr, pose_pyr):
        for a, b in zip(src_pyr, pose_pyr):
            if a[0].shape != b[0].shape or a[1:] != b[1:]:
                raise DimensionError("decode", a[0].shape, b[0].shape, detail="pyramid levels differ")
        x, h, w = pose_pyr.f3
        B = x.shape[0]
        flow = Tensor(np.zeros((B, 2, h, w), dtype=x.dtype))
        src_levels = (src_pyr.f3, src_pyr.f2, src_pyr.f1)
        skips = (None, pose_pyr.f2, pose_pyr.f1)
        ups = (None, self.up1, self.up2)
        pairs = []
        for stage, blocks in enumerate((self.stage1, self.stage2, self.stage3)):
            if stage:
                x, h, w = ups[stage](x, h, w, skips[stage])
                flow = F.upsample_flow_2x(flow)
            s_feat = src_levels[stage][0]
            for blk in blocks:
                out = blk(x, s_feat, flow, h, w)
                x, flow = out.x, out.flow
            pairs.append((out.o_w, out.o_g))
        return tokens_to_map(x, h, w), flow, pairs


def decode(src_pyr, pose_pyr, decoder):
    return decoder(src_pyr, pose_pyr)


class FusionOutput(NamedTuple):
    i_out: Tensor
    m_f: Tensor
    f_f: Tensor
    i_f: Tensor
    m_out: Tensor


def blend_branches(source_image, flow, mask, generated):
    """mask * Warp(source, flow) + (1 - mask) * generated."""
    warped = F.grid_sample_bilinear(source_image, flow)
    return add(mul(mask, warped), mul(sub(1.0, mask), generated))


class FusionBlock(Module):
    def __init__(self, c_in, rng, dtype=np.float32):
        c1, c2 = max(c_in // 2, 4), max(c_in // 4, 4)
        self.up1 = Conv2d(c_in, c1, 3, rng, dtype=dtype)
        self.up2 = Conv2d(c1, c2, 3, rng, dtype=dtype)
        self.flow_head = Conv2d(c2, 2, 3, rng, zero_init=True, dtype=dtype)
        self.fuse_mask_head = Conv2d(c2, 1, 3, rng, dtype=dtype)
        self.rgb_head = Conv2d(c2, 3, 3, rng, dtype=dtype)
        self.person_mask_head = Conv2d(c2, 1, 3, rng, dtype=dtype)

    def forward(self, o_de, f3, source_image):
        if source_image.ndim != 4 or o_de.shape[2] * 4 != source_image.shape[2] \
                or o_de.shape[3] * 4 != source_image.shape[3]:
            raise DimensionError("fusion_block", o_de.shape, source_image.shape,
                                 detail="decoder output must be 1/4 of the image resolution")
        if f3.shape[2:] != o_de.shape[2:]:
            raise DimensionError("fusion_block", f3.shape, o_de.shape, detail="flow resolution")
        y = F.leaky_relu(self.up1(F.nearest_upsample_2x(o_de)), 0.2)
        y = F.leaky_relu(self.up2(F.nearest_upsample_2x(y)), 0.2)
        f_f = add(self.flow_head(y), F.upsample_flow_2x(F.upsample_flow_2x(f3)))
        m_f = F.sigmoid(self.fuse_mask_head(y))
        i_f = F.tanh(self.rgb_head(y))
        m_out = F.sigmoid(self.person_mask_head(y))
        i_out = blend_branches(source_image, f_f, m_f, i_f)
        return FusionOutput(i_out, m_f, f_f, i_f, m_out)


def fusion_block(o_de, f3, source_image, fusion):
    return fusion(o_de, f3, source_image)


def composite_background(i_out, m_out, background):
    """m_out * i_out + (1 - m_out) * background; m_out broadcasts over channels."""
    if i_out.shape != background.shape or m_out.shape[0] != i_out.shape[0] \
            or m_out.shape[2:] != i_out.shape[2:] or m_out.shape[1] not in (1, i_out.shape[1]):
        raise DimensionError("composite_background", i_out.shape, m_out.shape, background.shape)
    return add(mul(m_out, i_out), mul(sub(1.0, m_out), background))
