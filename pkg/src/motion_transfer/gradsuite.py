"""Finite-difference checks of every differentiable op and layer, in float64.

Each case builds a scalar function by contracting the op's output with fixed
random weights, so every output element contributes to the gradient.
"""
import time

import numpy as np

from .attention import AttentionConfig, CSWinAttention
from .autograd import functional as F
from .autograd import tensor as T
from .autograd.gradcheck import check_gradients
from .autograd.tensor import Tensor, _make
from .decoder import DecoderBlock, FusionBlock
from .encoder import EncoderBlock, StageTransition
from .losses import (Discriminator, FeatureExtractor, feature_matching_loss, hinge_adversarial, mask_loss,
                     mutual_learning_loss, reconstruction_loss, soft_argmax_2d, style_loss, tv_loss)

TOLERANCE = 1e-4
LAYER_SAMPLES = 16
F64 = np.float64


def _t(rng, *shape, low=None, high=None):
    if low is None:
        return Tensor(rng.standard_normal(shape))
    return Tensor(rng.uniform(low, high, size=shape))


def _away_from_zero(rng, *shape):
    x = rng.uniform(0.2, 1.5, size=shape) * rng.choice([-1.0, 1.0], size=shape)
    return Tensor(x)


def _proj(out, rng):
    """Scalar sum(out * R) for a fixed random R."""
    r = Tensor(rng.standard_normal(out.shape))
    return T.reduce_sum(T.mul(out, r))


def _proj_fn(op, rng, shape):
    r = Tensor(rng.standard_normal(shape))
    return lambda *xs: T.reduce_sum(T.mul(op(*xs), r))


def _faulty_sigmoid(x):
    """Sigmoid with a 5% error planted in its backward rule (checker self-test)."""
    s = 1.0 / (1.0 + np.exp(-x.data))
    return _make(s, (x,), lambda g: (g * s * (1 - s) * 1.05,), "faulty_sigmoid")


def _randomize(module, rng, scale=0.3):
    for p in module.parameters():
        p.data = rng.standard_normal(p.shape) * scale
    return module


def op_cases(rng, inject_fault=False):
    """(name, fn, inputs) triples for the elementwise, shape and NN primitives."""
    cases = []

    def add_case(name, op, out_shape, *inputs):
        cases.append((name, _proj_fn(op, rng, out_shape), list(inputs)))

    add_case("matmul", T.matmul, (4, 3), _t(rng, 4, 5), _t(rng, 5, 3))
    add_case("matmul_batched", T.matmul, (2, 4, 3), _t(rng, 2, 4, 5), _t(rng, 2, 5, 3))
    add_case("add", T.add, (4, 5), _t(rng, 4, 5), _t(rng, 4, 5))
    add_case("add_broadcast", T.add, (3, 4, 5), _t(rng, 3, 4, 5), _t(rng, 4, 5))
    add_case("sub", T.sub, (4, 5), _t(rng, 4, 5), _t(rng, 4, 5))
    add_case("mul", T.mul, (4, 5), _t(rng, 4, 5), _t(rng, 4, 5))
    add_case("div", T.div, (4, 5), _t(rng, 4, 5), _away_from_zero(rng, 4, 5))
    add_case("scale", lambda a: T.scale(a, -2.5), (4, 5), _t(rng, 4, 5))
    a = _t(rng, 4, 5)
    add_case("maximum", T.maximum, (4, 5), a, Tensor(a.data + _away_from_zero(rng, 4, 5).data * 0.5))
    b = _t(rng, 4, 5)
    add_case("minimum", T.minimum, (4, 5), b, Tensor(b.data + _away_from_zero(rng, 4, 5).data * 0.5))
    add_case("abs", T.abs, (4, 5), _away_from_zero(rng, 4, 5))
    add_case("sqrt", T.sqrt, (4, 5), _t(rng, 4, 5, low=0.3, high=2.0))
    add_case("exp", T.exp, (4, 5), _t(rng, 4, 5))
    add_case("log", T.log, (4, 5), _t(rng, 4, 5, low=0.3, high=2.0))
    add_case("square", T.square, (4, 5), _t(rng, 4, 5))
    add_case("concat", lambda x, y: T.concat([x, y], axis=1), (4, 8), _t(rng, 4, 5), _t(rng, 4, 3))
    add_case("split", lambda x: T.mul(*T.split(x, [2, 2], axis=1)), (4, 2), _t(rng, 4, 4))
    add_case("reshape", lambda x: T.reshape(x, (2, 10)), (2, 10), _t(rng, 4, 5))
    add_case("permute", lambda x: T.permute(x, (2, 0, 1)), (5, 3, 4), _t(rng, 3, 4, 5))
    add_case("reduce_sum", lambda x: T.reduce_sum(x, 1), (4,), _t(rng, 4, 5))
    add_case("reduce_mean", lambda x: T.reduce_mean(x, 0, keepdims=True), (1, 5), _t(rng, 4, 5))
    add_case("getitem", lambda x: x[1:3, ::2], (2, 3), _t(rng, 4, 5))
    add_case("pad", lambda x: T.pad(x, ((1, 0), (0, 2))), (5, 7), _t(rng, 4, 5))

    add_case("conv2d", lambda x, w, bb: F.conv2d(x, w, bb, stride=1, pad=1), (1, 3, 5, 5),
             _t(rng, 1, 2, 5, 5), _t(rng, 3, 2, 3, 3), _t(rng, 3))
    add_case("conv2d_stride2", lambda x, w: F.conv2d(x, w, None, stride=2, pad=1), (2, 3, 3, 3),
             _t(rng, 2, 2, 5, 5), _t(rng, 3, 2, 3, 3))
    add_case("conv2d_4x4", lambda x, w: F.conv2d(x, w, None, stride=2, pad=1), (1, 2, 3, 3),
             _t(rng, 1, 2, 6, 6), _t(rng, 2, 2, 4, 4))
    add_case("depthwise_conv2d", F.depthwise_conv2d, (1, 3, 4, 5), _t(rng, 1, 3, 4, 5), _t(rng, 3, 3, 3),
             _t(rng, 3))
    add_case("linear", F.linear, (2, 3, 4), _t(rng, 2, 3, 5), _t(rng, 5, 4), _t(rng, 4))
    add_case("layer_norm", F.layer_norm, (4, 6), _t(rng, 4, 6), _t(rng, 6), _t(rng, 6))
    add_case("layer_norm_axis1", lambda x: F.layer_norm(x, axis=1), (2, 5, 3), _t(rng, 2, 5, 3))
    add_case("softmax", lambda x: F.softmax(x, axis=-1), (4, 5), _t(rng, 4, 5))
    add_case("softmax_axis0", lambda x: F.softmax(x, axis=0), (4, 5), _t(rng, 4, 5))
    add_case("gelu", F.gelu, (4, 5), _t(rng, 4, 5))
    add_case("sigmoid", _faulty_sigmoid if inject_fault else F.sigmoid, (4, 5), _t(rng, 4, 5))
    add_case("tanh", F.tanh, (4, 5), _t(rng, 4, 5))
    add_case("leaky_relu", lambda x: F.leaky_relu(x, 0.2), (4, 5), _away_from_zero(rng, 4, 5))
    add_case("relu", F.relu, (4, 5), _away_from_zero(rng, 4, 5))
    add_case("nearest_upsample_2x", F.nearest_upsample_2x, (1, 2, 6, 8), _t(rng, 1, 2, 3, 4))
    add_case("mlp", F.mlp, (2, 3, 4), _t(rng, 2, 3, 4), _t(rng, 4, 6), _t(rng, 6), _t(rng, 6, 4), _t(rng, 4))
    # keep sample points off the integer grid where bilinear weights have kinks
    flow = rng.uniform(-1.4, 1.4, size=(1, 2, 4, 4))
    flow = np.where(np.abs(flow - np.round(flow)) < 0.05, flow + 0.1, flow)
    add_case("grid_sample_bilinear", F.grid_sample_bilinear, (1, 1, 4, 4), _t(rng, 1, 1, 4, 4), Tensor(flow))
    add_case("grid_sample_bilinear_c3", F.grid_sample_bilinear, (2, 3, 4, 5), _t(rng, 2, 3, 4, 5),
             Tensor(rng.uniform(0.1, 0.4, size=(2, 2, 4, 5)) * rng.choice([-1, 1], size=(2, 2, 4, 5))))
    add_case("upsample_flow_2x", F.upsample_flow_2x, (1, 2, 4, 6), _t(rng, 1, 2, 2, 3))
    return cases


def layer_cases(rng):
    """Attention, encoder/decoder blocks and the fusion block with randomized weights."""
    cases = []
    attn = _randomize(CSWinAttention(AttentionConfig(8, 2, 2), rng, dtype=F64), rng)
    x, y = _t(rng, 1, 16, 8), _t(rng, 1, 16, 8)
    r = Tensor(rng.standard_normal((1, 16, 8)))
    params = attn.parameters()
    cases.append(("cswin_self_attention",
                  lambda x_, *_: T.reduce_sum(T.mul(attn(x_, None, 4, 4), r)), [x] + params))
    cases.append(("cswin_cross_attention",
                  lambda q_, kv_, *_: T.reduce_sum(T.mul(attn(q_, kv_, 4, 4), r)), [x, y] + params))

    blk = _randomize(EncoderBlock(AttentionConfig(8, 2, 2), rng, dtype=F64), rng)
    xe = _t(rng, 1, 16, 8)
    cases.append(("encoder_block", lambda x_, *_: _proj_like(blk(x_, 4, 4), r), [xe] + blk.parameters()))

    tr = _randomize(StageTransition(4, 8, rng, dtype=F64), rng)
    rt = Tensor(rng.standard_normal((1, 4, 8)))
    cases.append(("stage_transition", lambda x_, *_: _proj_like(tr(x_, 4, 4)[0], rt),
                  [_t(rng, 1, 16, 4)] + tr.parameters()))

    dec = _randomize(DecoderBlock(AttentionConfig(16, 2, 2), rng, dtype=F64), rng, 0.2)
    xd, sd = _t(rng, 1, 16, 16), _t(rng, 1, 16, 16)
    fd = Tensor(rng.uniform(0.1, 0.4, size=(1, 2, 4, 4)))
    r1, r2, r3, r4 = (Tensor(rng.standard_normal(s)) for s in ((1, 16, 16), (1, 2, 4, 4), (1, 16, 4, 4),
                                                                (1, 16, 4, 4)))

    def dec_fn(x_, s_, f_, *_):
        out = dec(x_, s_, f_, 4, 4)
        return T.add(T.add(_proj_like(out.x, r1), _proj_like(out.flow, r2)),
                     T.add(_proj_like(out.o_w, r3), _proj_like(out.o_g, r4)))

    cases.append(("decoder_block", dec_fn, [xd, sd, fd] + dec.parameters()))

    fus = _randomize(FusionBlock(8, rng, dtype=F64), rng, 0.2)
    o_de, f3 = _t(rng, 1, 8, 2, 2), Tensor(rng.uniform(0.05, 0.2, size=(1, 2, 2, 2)))
    src = _t(rng, 1, 3, 8, 8)
    ri, rm = Tensor(rng.standard_normal((1, 3, 8, 8))), Tensor(rng.standard_normal((1, 1, 8, 8)))

    def fus_fn(o_, f_, s_, *_):
        out = fus(o_, f_, s_)
        return T.add(_proj_like(out.i_out, ri), _proj_like(out.m_out, rm))

    cases.append(("fusion_block", fus_fn, [o_de, f3, src] + fus.parameters()))
    return cases


def _proj_like(out, r):
    return T.reduce_sum(T.mul(out, r))


def loss_cases(rng):
    cases = []
    cases.append(("soft_argmax_2d", lambda s: T.add(*soft_argmax_2d(s, 3, 4, temperature=2.0)),
                  [_t(rng, 12)]))
    ow, og = _t(rng, 1, 4, 3, 3), _t(rng, 1, 4, 3, 3)
    cases.append(("mutual_learning_loss", lambda a, b: mutual_learning_loss([(a, b)], temperature=3.0),
                  [ow, og]))
    fx = FeatureExtractor(channels=(3, 4), seed=5, dtype=F64)
    ia, ib = _t(rng, 1, 3, 8, 8), _t(rng, 1, 3, 8, 8)
    cases.append(("reconstruction_loss", lambda a, b: reconstruction_loss(a, b, fx), [ia, ib]))
    cases.append(("style_loss", lambda a, b: style_loss(a, b, fx), [_t(rng, 1, 3, 8, 8), _t(rng, 1, 3, 8, 8)]))
    d = Discriminator(in_channels=3 + 2, channels=(4, 4, 4, 4), rng=rng, dtype=F64)
    pose = Tensor(rng.uniform(0, 1, size=(1, 2, 16, 16)))
    real = Tensor(rng.standard_normal((1, 3, 16, 16)))
    # discriminator weights are left out: the real branch is stop-gradient by design,
    # which finite differences through those weights cannot reproduce
    cases.append(("feature_matching_loss", lambda a: feature_matching_loss(d, a, real, pose),
                  [_t(rng, 1, 3, 16, 16)]))
    cases.append(("hinge_adversarial",
                  lambda a, b: T.add(*hinge_adversarial(a, b)),
                  [Tensor(1.0 + _away_from_zero(rng, 2, 1, 3, 3).data),
                   Tensor(-1.0 + _away_from_zero(rng, 2, 1, 3, 3).data)]))
    fl = _t(rng, 2, 2, 4, 5)
    cases.append(("tv_loss", tv_loss, [fl]))
    mg = rng.integers(0, 2, size=(1, 1, 4, 4)).astype(F64)
    cases.append(("mask_loss", lambda m: mask_loss(m, Tensor(mg)),
                  [Tensor(np.clip(mg + rng.uniform(0.1, 0.4, size=mg.shape) * np.where(mg > 0, -1, 1), 0, 1))]))
    return cases


def all_cases(seed, inject_fault=False):
    """(name, fn, inputs, max_elements): primitives are probed at every element,
    layers at a random subset of each parameter tensor."""
    rng = np.random.default_rng(seed)
    full = [c + (None,) for c in op_cases(rng, inject_fault)]
    sampled = [c + (LAYER_SAMPLES,) for c in layer_cases(rng) + loss_cases(rng)]
    return full + sampled


def run_suite(seeds=range(5), inject_fault=False, verbose=False, tolerance=TOLERANCE, record=None):
    """Run every case for every seed; returns a list of (seed, name, error) failures.

    When ``record`` is a list, every (seed, name, error) result is appended to it.
    """
    failures = []
    for seed in seeds:
        for name, fn, inputs, max_elements in all_cases(seed, inject_fault):
            t0 = time.perf_counter()
            err = check_gradients(fn, inputs, max_elements=max_elements, rng=np.random.default_rng(seed))
            ok = err < tolerance
            if record is not None:
                record.append((seed, name, err))
            if not ok:
                failures.append((seed, name, err))
            if verbose:
                print(f"seed {seed} {name:28s} rel_err {err:.2e} {'ok' if ok else 'FAIL'} "
                      f"({time.perf_counter() - t0:.2f}s)", flush=True)
    return failures
