"""Generator wiring: source encoder, pose encoder, decoder, fusion block."""
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .autograd.module import Module
from .autograd.tensor import Tensor
from .decoder import Decoder, DecoderConfig, FusionBlock
from .encoder import Encoder, EncoderConfig
from .errors import ConfigError

POSE_CHANNELS = 26


@dataclass
class ModelConfig:
    image_size: int = 64
    enc_depths: list = field(default_factory=lambda: [1, 2, 21])
    dec_depths: list = field(default_factory=lambda: [2, 4, 12])
    channels: list = field(default_factory=lambda: [32, 64, 128])
    heads: list = field(default_factory=lambda: [2, 4, 8])
    stripe_widths: list = field(default_factory=lambda: [1, 2, 4])
    mlp_ratio: float = 4.0
    disc_channels: list = field(default_factory=lambda: [64, 128, 256, 512])
    dense_cross_attention: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.image_size % 16:
            raise ConfigError(f"image_size must be divisible by 16, got {self.image_size}")

    def encoder(self, in_channels):
        return EncoderConfig(in_channels, list(self.enc_depths), list(self.channels), list(self.heads),
                             list(self.stripe_widths), self.mlp_ratio)

    def decoder(self):
        return DecoderConfig(list(self.dec_depths), self.channels[::-1], self.heads[::-1],
                             self.stripe_widths[::-1], self.mlp_ratio, self.dense_cross_attention)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def toy_config(**overrides):
    """Desk-scale widths and depths used for the overfit run and most tests."""
    base = dict(image_size=64, enc_depths=[1, 1, 2], dec_depths=[1, 2, 3], channels=[32, 64, 128])
    base.update(overrides)
    return ModelConfig(**base)


class GeneratorOutput(NamedTuple):
    i_out: Tensor
    m_out: Tensor
    f_f: Tensor
    m_f: Tensor
    i_f: Tensor
    o_de: Tensor
    f3: Tensor
    branch_pairs: list


class Generator(Module):
    def __init__(self, cfg, rng=None, dtype=np.float32):
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        self.cfg = cfg
        self.enc_src = Encoder(cfg.encoder(3), rng, dtype=dtype)
        self.enc_pose = Encoder(cfg.encoder(POSE_CHANNELS), rng, dtype=dtype)
        self.decoder = Decoder(cfg.decoder(), rng, dtype=dtype)
        self.fusion = FusionBlock(cfg.channels[0], rng, dtype=dtype)
        self.assign_names("generator.")

    def forward(self, source_image, pose_image):
        src_pyr = self.enc_src(source_image)
        pose_pyr = self.enc_pose(pose_image)
        o_de, f3, pairs = self.decoder(src_pyr, pose_pyr)
        fused = self.fusion(o_de, f3, source_image)
        return GeneratorOutput(fused.i_out, fused.m_out, fused.f_f, fused.m_f, fused.i_f, o_de, f3, pairs)
