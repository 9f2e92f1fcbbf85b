"""Cross-shaped window (stripe) multi-head attention.

Half the heads attend inside horizontal stripes of ``stripe_width`` rows, the
other half inside vertical stripes of ``stripe_width`` columns. A depthwise
3x3 convolution of the values (LePE) is added to the attention output before
the output projection.
"""
from dataclasses import dataclass

import numpy as np

from .autograd import functional as F
from .autograd.module import DepthwiseConv2d, Linear, Module, map_to_tokens, tokens_to_map
from .autograd.tensor import Tensor, add, concat, matmul, pad, permute, reshape, scale, split
from .errors import ConfigError, DimensionError

_MASKED = -1e9


@dataclass
class AttentionConfig:
    channels: int
    num_heads: int
    stripe_width: int
    use_lepe: bool = True
    dense: bool = False

    def __post_init__(self):
        if self.num_heads <= 0 or self.num_heads % 2:
            raise ConfigError(f"num_heads must be a positive even number, got {self.num_heads}")
        if self.channels % self.num_heads:
            raise ConfigError(f"num_heads={self.num_heads} does not divide channels={self.channels}")
        if self.stripe_width < 1:
            raise ConfigError(f"stripe_width must be >= 1, got {self.stripe_width}")

    @property
    def head_dim(self):
        return self.channels // self.num_heads


def _grid_attend(q, k, v, rows, cols, num_heads, sw, return_weights=False):
    """Attention within horizontal stripes of ``sw`` rows on a (B, rows, cols, C) grid.

    Rows are zero-padded up to a multiple of ``sw``; padded keys are masked out
    and padded queries cropped from the result.
    """
    B, _, _, C = q.shape
    d = C // num_heads
    extra = (-rows) % sw
    if extra:
        widths = ((0, 0), (0, extra), (0, 0), (0, 0))
        q, k, v = pad(q, widths), pad(k, widths), pad(v, widths)
    prow = rows + extra
    ns = prow // sw
    L = sw * cols

    def to_stripes(t):
        t = reshape(t, (B, ns, sw, cols, num_heads, d))
        t = permute(t, (0, 1, 4, 2, 3, 5))
        return reshape(t, (B, ns, num_heads, L, d))

    qs, ks, vs = to_stripes(q), to_stripes(k), to_stripes(v)
    logits = scale(matmul(qs, permute(ks, (0, 1, 2, 4, 3))), 1.0 / np.sqrt(d))
    if extra:
        valid = np.ones((prow, cols), dtype=bool)
        valid[rows:] = False
        key_mask = np.where(valid.reshape(ns, 1, 1, L), 0.0, _MASKED).astype(q.dtype)
        logits = add(logits, Tensor(key_mask))
    weights = F.softmax(logits, axis=-1)
    out = matmul(weights, vs)
    out = reshape(out, (B, ns, num_heads, sw, cols, d))
    out = permute(out, (0, 1, 3, 4, 2, 5))
    out = reshape(out, (B, prow, cols, C))
    if extra:
        out = out[:, :rows]
    return (out, weights) if return_weights else out


def stripe_attention(q, k, v, h, w, num_heads, sw, horizontal, return_weights=False):
    """Stripe attention on token tensors (B, h*w, C) already projected to Q, K, V."""
    B, L, C = q.shape
    grids = [reshape(t, (B, h, w, C)) for t in (q, k, v)]
    if horizontal:
        res = _grid_attend(*grids, h, w, num_heads, sw, return_weights)
    else:
        grids = [permute(g, (0, 2, 1, 3)) for g in grids]
        res = _grid_attend(*grids, w, h, num_heads, sw, return_weights)
    out, weights = res if return_weights else (res, None)
    if not horizontal:
        out = permute(out, (0, 2, 1, 3))
    out = reshape(out, (B, L, C))
    return (out, weights) if return_weights else out


def dense_attention(q, k, v, num_heads, return_weights=False):
    """Plain multi-head attention over all tokens (ablation switch and reference path)."""
    B, L, C = q.shape
    d = C // num_heads

    def heads(t):
        return permute(reshape(t, (B, L, num_heads, d)), (0, 2, 1, 3))

    logits = scale(matmul(heads(q), permute(heads(k), (0, 1, 3, 2))), 1.0 / np.sqrt(d))
    weights = F.softmax(logits, axis=-1)
    out = reshape(permute(matmul(weights, heads(v)), (0, 2, 1, 3)), (B, L, C))
    return (out, weights) if return_weights else out


class CSWinAttention(Module):
    """Projections + stripe attention + LePE + output projection.

    Called with ``kv_src=None`` it is self-attention; otherwise queries come
    from ``q_src`` and keys/values from ``kv_src``.
    """

    def __init__(self, cfg, rng, dtype=np.float32):
        self.cfg = cfg
        C = cfg.channels
        self.q = Linear(C, C, rng, dtype=dtype)
        self.k = Linear(C, C, rng, dtype=dtype)
        self.v = Linear(C, C, rng, dtype=dtype)
        self.lepe = DepthwiseConv2d(C, rng, dtype=dtype) if cfg.use_lepe else None
        self.proj = Linear(C, C, rng, dtype=dtype)
        self.last_weights = None

    def forward(self, q_src, kv_src=None, h=None, w=None, record_weights=False):
        kv_src = q_src if kv_src is None else kv_src
        if q_src.ndim != 3 or q_src.shape[1] != h * w:
            raise DimensionError("cswin_attention", q_src.shape, (h, w), detail="tokens must be (B, h*w, C)")
        if kv_src.shape != q_src.shape:
            raise DimensionError("cswin_cross_attention", q_src.shape, kv_src.shape)
        cfg = self.cfg
        if q_src.shape[2] != cfg.channels:
            raise DimensionError("cswin_attention", q_src.shape, (cfg.channels,), detail="channel width")
        if not cfg.dense and cfg.stripe_width > h and cfg.stripe_width > w:
            raise ConfigError(f"stripe_width {cfg.stripe_width} exceeds both map extents {h}x{w}")
        q, k, v = self.q(q_src), self.k(kv_src), self.v(kv_src)
        if cfg.dense:
            res = dense_attention(q, k, v, cfg.num_heads, return_weights=record_weights)
            out, weights = res if record_weights else (res, None)
            weights = [weights]
        else:
            half = cfg.num_heads // 2
            qh, qv = split(q, 2, axis=2)
            kh, kv = split(k, 2, axis=2)
            vh, vv = split(v, 2, axis=2)
            rh = stripe_attention(qh, kh, vh, h, w, half, min(cfg.stripe_width, h), True, record_weights)
            rv = stripe_attention(qv, kv, vv, h, w, half, min(cfg.stripe_width, w), False, record_weights)
            if record_weights:
                (oh, wh), (ov, wv) = rh, rv
                weights = [wh, wv]
            else:
                oh, ov = rh, rv
            out = concat([oh, ov], axis=2)
        if record_weights:
            self.last_weights = [wt.data for wt in weights]
        if self.lepe is not None:
            out = add(out, map_to_tokens(self.lepe(tokens_to_map(v, h, w))))
        return self.proj(out)


def cswin_self_attention(x, h, w, attn):
    return attn(x, None, h, w)


def cswin_cross_attention(q_src, kv_src, h, w, attn):
    if q_src.shape != kv_src.shape:
        raise DimensionError("cswin_cross_attention", q_src.shape, kv_src.shape)
    return attn(q_src, kv_src, h, w)
