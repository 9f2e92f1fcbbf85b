"""Training objectives, the patch discriminator and the fixed feature extractor."""
from dataclasses import dataclass, fields

import numpy as np

from .autograd import functional as F
from .autograd.module import Conv2d, Module
from .autograd.tensor import (Tensor, abs, add, concat, matmul, mul, permute, reduce_mean, reduce_sum,
                              reshape, scale, sqrt, sub)
from .errors import ArgumentError, DimensionError


@dataclass
class LossWeights:
    rec: float = 10.0
    fm: float = 10.0
    adv: float = 1.0
    mutual: float = 1.0
    tv: float = 0.5
    mask: float = 1.0
    style: float = 10.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ArgumentError(f"loss weight {f.name} must be non-negative")


@dataclass
class LossBundle:
    rec: Tensor
    fm: Tensor
    style: Tensor
    adv_g: Tensor
    mutual: Tensor
    tv: Tensor
    mask: Tensor
    total: Tensor
    adv_d: Tensor = None

    def scalars(self):
        return {k: float(np.asarray(v.data if isinstance(v, Tensor) else v))
                for k, v in asdict_shallow(self).items() if v is not None}


def asdict_shallow(obj):
    return {f.name: getattr(obj, f.name) for f in fields(obj)}


def _as_t(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _same_shape(op, a, b):
    if a.shape != b.shape:
        raise DimensionError(op, a.shape, b.shape)


def l1_mean(a, b):
    return reduce_mean(abs(sub(a, b)))


# -- fixed feature extractor ------------------------------------------------

class FeatureExtractor(Module):
    """Frozen random-weight conv pyramid with five ReLU taps at halving resolutions.

    Stands in for a pretrained VGG-19; any module returning a list of feature
    maps can be used instead.
    """

    def __init__(self, channels=(16, 32, 64, 64, 64), seed=1234, in_channels=3, dtype=np.float32):
        rng = np.random.default_rng(seed)
        self.seed = seed
        self.convs = []
        c_prev = in_channels
        for i, c in enumerate(channels):
            conv = Conv2d(c_prev, c, 3, rng, stride=1 if i == 0 else 2, dtype=dtype)
            conv.weight.data = (rng.standard_normal(conv.weight.shape) * np.sqrt(2.0 / (c_prev * 9))).astype(dtype)
            self.convs.append(conv)
            c_prev = c
        self.freeze()

    def forward(self, image):
        taps, x = [], image
        for conv in self.convs:
            x = F.relu(conv(x))
            taps.append(x)
        return taps


# -- discriminator ----------------------------------------------------------

class Discriminator(Module):
    """Pose-conditional patch discriminator over concat(image, pose sticks).

    Four stride-2 4x4 convolutions with leaky ReLU; the first three activations
    are exposed as feature-matching taps, the last feeds a 3x3 logit head.
    """

    def __init__(self, in_channels=3 + 26, channels=(64, 128, 256, 512), rng=None, seed=1, dtype=np.float32):
        rng = np.random.default_rng(seed) if rng is None else rng
        self.convs = []
        c_prev = in_channels
        for c in channels:
            self.convs.append(Conv2d(c_prev, c, 4, rng, stride=2, pad=1, dtype=dtype))
            c_prev = c
        self.head = Conv2d(c_prev, 1, 3, rng, dtype=dtype)
        self.num_taps = len(channels) - 1
        self.assign_names("discriminator.")

    def forward(self, image, pose):
        if image.shape[0] != pose.shape[0] or image.shape[2:] != pose.shape[2:]:
            raise DimensionError("discriminator", image.shape, pose.shape)
        x = concat([image, pose], axis=1)
        taps = []
        for conv in self.convs:
            x = F.leaky_relu(conv(x), 0.2)
            taps.append(x)
        return self.head(x), taps[:self.num_taps]


# -- mutual learning --------------------------------------------------------

def soft_argmax_2d(scores, h, w, temperature=200.0):
    """Softmax-weighted expected (row, col) over the last axis of length h*w."""
    if temperature <= 0:
        raise ArgumentError(f"temperature must be positive, got {temperature}")
    scores = _as_t(scores)
    if scores.shape[-1] != h * w:
        raise DimensionError("soft_argmax_2d", scores.shape, (h, w))
    p = F.softmax(scale(scores, temperature), axis=-1)
    idx = np.arange(h * w)
    rows = Tensor((idx // w).astype(scores.dtype))
    cols = Tensor((idx % w).astype(scores.dtype))
    return reduce_sum(mul(p, rows), -1), reduce_sum(mul(p, cols), -1)


def cosine_similarity_matrix(a, b, eps=1e-12):
    """(B, N, C) x (B, M, C) -> (B, N, M) cosine similarities."""
    an = a / sqrt(add(reduce_sum(mul(a, a), -1, keepdims=True), eps))
    bn = b / sqrt(add(reduce_sum(mul(b, b), -1, keepdims=True), eps))
    return matmul(an, permute(bn, (0, 2, 1)))


def _pair_tokens(o):
    B, C, h, w = o.shape
    return permute(reshape(o, (B, C, h * w)), (0, 2, 1)), h, w


def mutual_learning_loss(branch_pairs, temperature=200.0):
    """Penalise each warp-branch location whose best cosine match in the generation branch lies elsewhere.

    Locations are compared in per-axis [0, 1] coordinates; the per-stage sum
    over locations is averaged over the batch and summed over stages.
    """
    total = None
    for o_w, o_g in branch_pairs:
        _same_shape("mutual_learning_loss", o_w, o_g)
        tw, h, w = _pair_tokens(o_w)
        tg, _, _ = _pair_tokens(o_g)
        sim = cosine_similarity_matrix(tw, tg)
        y, x = soft_argmax_2d(sim, h, w, temperature)
        idx = np.arange(h * w)
        ry, rx = 1.0 / max(h - 1, 1), 1.0 / max(w - 1, 1)
        dy = abs(sub(scale(y, ry), Tensor((idx // w * ry).astype(y.dtype))))
        dx = abs(sub(scale(x, rx), Tensor((idx % w * rx).astype(x.dtype))))
        stage = scale(reduce_sum(add(dy, dx)), 1.0 / o_w.shape[0])
        total = stage if total is None else add(total, stage)
    return total


# -- perceptual / adversarial terms ----------------------------------------

def reconstruction_loss(i_out, i_gt, fx):
    _same_shape("reconstruction_loss", i_out, i_gt)
    loss = None
    for a, b in zip(fx(i_out), fx(i_gt)):
        term = l1_mean(a, b)
        loss = term if loss is None else add(loss, term)
    return loss


def gram(features):
    """Channel Gram matrix F F^T over spatial positions: (B, C, H, W) -> (B, C, C)."""
    B, C, H, W = features.shape
    flat = reshape(features, (B, C, H * W))
    return matmul(flat, permute(flat, (0, 2, 1)))


def style_loss(i_out, i_gt, fx, normalize=True):
    """Sum over taps of mean |G_out - G_gt| (the 1/C^2 factor is the mean over Gram entries).

    With ``normalize`` each Gram is divided by its number of spatial positions
    so that large taps do not swamp the other objectives.
    """
    _same_shape("style_loss", i_out, i_gt)
    loss = None
    for a, b in zip(fx(i_out), fx(i_gt)):
        ga, gb = gram(a), gram(b)
        if normalize:
            n = a.shape[2] * a.shape[3]
            ga, gb = scale(ga, 1.0 / n), scale(gb, 1.0 / n)
        term = l1_mean(ga, gb)
        loss = term if loss is None else add(loss, term)
    return loss


def feature_matching_from_taps(fake_taps, real_taps):
    loss = None
    for a, b in zip(fake_taps, real_taps):
        term = l1_mean(a, F.detach(b))
        loss = term if loss is None else add(loss, term)
    return loss


def feature_matching_loss(d, i_out, i_gt, pose):
    _same_shape("feature_matching_loss", i_out, i_gt)
    _, fake_taps = d(i_out, pose)
    _, real_taps = d(F.detach(_as_t(i_gt)), pose)
    return feature_matching_from_taps(fake_taps, real_taps)


def hinge_adversarial(d_real_logits, d_fake_logits):
    """Returns (loss_d, loss_g) for the hinge GAN objective."""
    real, fake = _as_t(d_real_logits), _as_t(d_fake_logits)
    loss_d = add(reduce_mean(F.relu(sub(1.0, real))), reduce_mean(F.relu(add(fake, 1.0))))
    loss_g = scale(reduce_mean(fake), -1.0)
    return loss_d, loss_g


def tv_loss(flow):
    """(1/HW) * sum of absolute forward differences of both flow channels, batch-averaged."""
    flow = _as_t(flow)
    B, _, H, W = flow.shape
    dx = abs(sub(flow[:, :, :, 1:], flow[:, :, :, :-1]))
    dy = abs(sub(flow[:, :, 1:, :], flow[:, :, :-1, :]))
    return scale(add(reduce_sum(dx), reduce_sum(dy)), 1.0 / (B * H * W))


def mask_loss(m_out, m_gt):
    m_out, m_gt = _as_t(m_out), _as_t(m_gt)
    _same_shape("mask_loss", m_out, m_gt)
    return l1_mean(m_out, m_gt)


def total_loss(rec, fm, adv_g, mutual, tv, mask, style, weights=None, adv_d=None):
    """Weighted generator objective; ``adv_d`` is carried along but never enters the total."""
    w = weights or LossWeights()
    terms = dict(rec=rec, fm=fm, adv_g=adv_g, mutual=mutual, tv=tv, mask=mask, style=style)
    terms = {k: _as_t(v) for k, v in terms.items()}
    lam = dict(rec=w.rec, fm=w.fm, adv_g=w.adv, mutual=w.mutual, tv=w.tv, mask=w.mask, style=w.style)
    total = None
    for k, v in terms.items():
        term = scale(v, lam[k])
        total = term if total is None else add(total, term)
    return LossBundle(total=total, adv_d=adv_d, **terms)
