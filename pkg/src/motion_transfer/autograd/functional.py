"""Fused network primitives with hand-written backward passes."""
import numpy as np
import scipy.sparse as sp
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf, expit

from ..errors import ArgumentError, DimensionError
from .tensor import Tensor, _make, add, matmul, unbroadcast

_SQRT_HALF = 0.7071067811865476
_INV_SQRT_2PI = 0.3989422804014327


# -- convolution ------------------------------------------------------------

def _im2col(x, kh, kw, stride, pad):
    """Patches as (B, C*kh*kw, Ho*Wo), channel-major so the matmul output needs no transpose."""
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    B, C, Ho, Wo = win.shape[:4]
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(B, C * kh * kw, Ho * Wo)
    return cols, Ho, Wo, x.shape


def conv2d(x, weight, bias=None, stride=1, pad=0):
    """Cross-correlation of (B,C,H,W) input with (O,C,kh,kw) weights."""
    if x.ndim != 4:
        raise DimensionError("conv2d", x.shape, weight.shape, detail="input must be (B,C,H,W)")
    if weight.ndim != 4 or weight.shape[1] != x.shape[1]:
        raise DimensionError("conv2d", x.shape, weight.shape, detail="channel mismatch")
    B, C, H, W = x.shape
    O, _, kh, kw = weight.shape
    if H + 2 * pad < kh or W + 2 * pad < kw:
        raise DimensionError("conv2d", x.shape, weight.shape, detail="kernel larger than padded input")
    cols, Ho, Wo, padded = _im2col(x.data, kh, kw, stride, pad)
    wmat = weight.data.reshape(O, -1)
    out = np.matmul(wmat, cols)
    if bias is not None:
        out += bias.data[:, None]
    out = out.reshape(B, O, Ho, Wo)

    def backward(g):
        g3 = g.reshape(B, O, Ho * Wo)
        gx = gw = gb = None
        if weight.requires_grad:
            gw = np.einsum("bon,bkn->ok", g3, cols, optimize=True).reshape(weight.shape)
        if bias is not None and bias.requires_grad:
            gb = g3.sum(axis=(0, 2))
        if x.requires_grad:
            dcols = np.matmul(wmat.T, g3).reshape(B, C, kh, kw, Ho, Wo)
            gxp = np.zeros(padded, dtype=g.dtype)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + stride * Ho:stride, j:j + stride * Wo:stride] += dcols[:, :, i, j]
            gx = gxp[:, :, pad:pad + H, pad:pad + W] if pad else gxp
        return (gx, gw) if bias is None else (gx, gw, gb)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _make(out, parents, backward, "conv2d")


def depthwise_conv2d(x, weight, bias=None):
    """Per-channel 3x3-style convolution, stride 1, same padding. weight: (C,kh,kw)."""
    if x.ndim != 4:
        raise DimensionError("depthwise_conv2d", x.shape, weight.shape, detail="input must be (B,C,H,W)")
    C, kh, kw = weight.shape
    if x.shape[1] != C or kh % 2 == 0 or kw % 2 == 0:
        raise DimensionError("depthwise_conv2d", x.shape, weight.shape)
    B, _, H, W = x.shape
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    wd = weight.data
    out = np.zeros_like(x.data)
    for i in range(kh):
        for j in range(kw):
            out += xp[:, :, i:i + H, j:j + W] * wd[None, :, i, j, None, None]
    if bias is not None:
        out += bias.data[None, :, None, None]

    def backward(g):
        gx = gw = gb = None
        if weight.requires_grad:
            gw = np.empty_like(wd)
            for i in range(kh):
                for j in range(kw):
                    gw[:, i, j] = np.einsum("bchw,bchw->c", g, xp[:, :, i:i + H, j:j + W])
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + H, j:j + W] += g * wd[None, :, i, j, None, None]
            gx = gxp[:, :, ph:ph + H, pw:pw + W]
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return (gx, gw) if bias is None else (gx, gw, gb)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _make(out, parents, backward, "depthwise_conv2d")


def linear(x, weight, bias=None):
    """x @ weight + bias with weight stored as (in, out)."""
    out = matmul(x, weight)
    return out if bias is None else add(out, bias)


# -- normalisation / activations -------------------------------------------

def layer_norm(x, gamma=None, beta=None, axis=-1, eps=1e-5):
    if eps <= 0:
        raise ArgumentError(f"layer_norm eps must be positive, got {eps}")
    if not -x.ndim <= axis < x.ndim:
        raise ArgumentError(f"layer_norm axis {axis} invalid for shape {x.shape}")
    ax = axis % x.ndim
    xd = x.data
    mu = xd.mean(axis=ax, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=ax, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    pshape = [1] * x.ndim
    pshape[ax] = x.shape[ax]
    gd = gamma.data.reshape(pshape) if gamma is not None else None
    out = xhat * gd if gd is not None else xhat
    if beta is not None:
        out = out + beta.data.reshape(pshape)
    red = tuple(i for i in range(x.ndim) if i != ax)

    def backward(g):
        dxhat = g * gd if gd is not None else g
        gx = rstd * (dxhat - dxhat.mean(axis=ax, keepdims=True)
                     - xhat * (dxhat * xhat).mean(axis=ax, keepdims=True))
        grads = [gx]
        if gamma is not None:
            grads.append((g * xhat).sum(axis=red).reshape(gamma.shape))
        if beta is not None:
            grads.append(g.sum(axis=red).reshape(beta.shape))
        return tuple(grads)

    parents = tuple(p for p in (x, gamma, beta) if p is not None)
    return _make(out, parents, backward, "layer_norm")


def softmax(x, axis=-1):
    if not -x.ndim <= axis < x.ndim:
        raise ArgumentError(f"softmax axis {axis} invalid for shape {x.shape}")
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _make(y, (x,), backward, "softmax")


def gelu(x):
    """Exact (erf) GELU."""
    xd = x.data
    cdf = 0.5 * (1.0 + erf(xd * _SQRT_HALF))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * xd * xd)
    return _make(xd * cdf, (x,), lambda g: (g * (cdf + xd * pdf),), "gelu")


def sigmoid(x):
    y = expit(x.data)
    return _make(y, (x,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def tanh(x):
    y = np.tanh(x.data)
    return _make(y, (x,), lambda g: (g * (1.0 - y * y),), "tanh")


def leaky_relu(x, slope=0.2):
    pos = x.data > 0
    factor = np.where(pos, 1.0, slope).astype(x.dtype)
    return _make(x.data * factor, (x,), lambda g: (g * factor,), "leaky_relu")


def relu(x):
    pos = x.data > 0
    return _make(x.data * pos, (x,), lambda g: (g * pos,), "relu")


def nearest_upsample_2x(x):
    """Replicate each pixel of (..., H, W) into a 2x2 block."""
    if x.ndim < 2:
        raise DimensionError("nearest_upsample_2x", x.shape, detail="needs at least 2 dims")
    out = x.data.repeat(2, axis=-2).repeat(2, axis=-1)

    def backward(g):
        s = g.shape
        return (g.reshape(*s[:-2], s[-2] // 2, 2, s[-1] // 2, 2).sum(axis=(-3, -1)),)

    return _make(out, (x,), backward, "nearest_upsample_2x")


def mlp(x, w1, b1, w2, b2):
    return linear(gelu(linear(x, w1, b1)), w2, b2)


# -- warping ----------------------------------------------------------------

def _corner_weights(flow, H, W):
    gy, gx = np.meshgrid(np.arange(H, dtype=flow.dtype), np.arange(W, dtype=flow.dtype), indexing="ij")
    sx_raw = gx[None] + flow[:, 0]
    sy_raw = gy[None] + flow[:, 1]
    sx = np.clip(sx_raw, 0, W - 1)
    sy = np.clip(sy_raw, 0, H - 1)
    x0 = np.clip(np.floor(sx).astype(np.int64), 0, max(W - 2, 0))
    y0 = np.clip(np.floor(sy).astype(np.int64), 0, max(H - 2, 0))
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    wx = (sx - x0).astype(flow.dtype)
    wy = (sy - y0).astype(flow.dtype)
    # clamped coordinates carry no gradient
    inx = ((sx_raw >= 0) & (sx_raw <= W - 1)).astype(flow.dtype)
    iny = ((sy_raw >= 0) & (sy_raw <= H - 1)).astype(flow.dtype)
    return x0, x1, y0, y1, wx, wy, inx, iny


def grid_sample_bilinear(feature, flow):
    """Backward-warp ``feature`` by pixel-unit ``flow`` (dx, dy) with border clamping.

    output[b, c, y, x] samples feature[b, c] at (x + dx, y + dy).
    """
    if feature.ndim != 4 or flow.ndim != 4 or flow.shape[1] != 2 \
            or flow.shape[0] != feature.shape[0] or flow.shape[2:] != feature.shape[2:]:
        raise DimensionError("grid_sample_bilinear", feature.shape, flow.shape)
    B, C, H, W = feature.shape
    f = feature.data
    x0, x1, y0, y1, wx, wy, inx, iny = _corner_weights(flow.data, H, W)
    bidx = np.arange(B)[:, None, None]
    v00 = f[bidx, :, y0, x0]  # (B,H,W,C)
    v01 = f[bidx, :, y0, x1]
    v10 = f[bidx, :, y1, x0]
    v11 = f[bidx, :, y1, x1]
    w00 = ((1 - wx) * (1 - wy))[..., None]
    w01 = (wx * (1 - wy))[..., None]
    w10 = ((1 - wx) * wy)[..., None]
    w11 = (wx * wy)[..., None]
    out = (w00 * v00 + w01 * v01 + w10 * v10 + w11 * v11).transpose(0, 3, 1, 2)

    def backward(g):
        gf = gflow = None
        gt = g.transpose(0, 2, 3, 1)  # (B,H,W,C)
        if flow.requires_grad:
            wxe, wye = wx[..., None], wy[..., None]
            dsx = ((1 - wye) * (v01 - v00) + wye * (v11 - v10))
            dsy = ((1 - wxe) * (v10 - v00) + wxe * (v11 - v01))
            gflow = np.stack([(gt * dsx).sum(-1) * inx, (gt * dsy).sum(-1) * iny], axis=1)
        if feature.requires_grad:
            gf = np.empty_like(f)
            n = H * W
            rows = np.repeat(np.arange(n), 4)
            for b in range(B):
                cols = np.stack([y0[b] * W + x0[b], y0[b] * W + x1[b],
                                 y1[b] * W + x0[b], y1[b] * W + x1[b]], axis=-1).reshape(-1)
                vals = np.stack([w00[b, ..., 0], w01[b, ..., 0], w10[b, ..., 0], w11[b, ..., 0]],
                                axis=-1).reshape(-1)
                smat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
                gf[b] = (smat.T @ g[b].reshape(C, n).T).T.reshape(C, H, W)
        return gf, gflow

    return _make(np.ascontiguousarray(out), (feature, flow), backward, "grid_sample_bilinear")


def upsample_flow_2x(flow):
    """Nearest x2 upsampling of a pixel-unit flow; values double to stay in pixel units."""
    return nearest_upsample_2x(flow) * 2.0


def detach(x):
    return Tensor(x.data)


__all__ = [
    "conv2d", "depthwise_conv2d", "linear", "layer_norm", "softmax", "gelu", "sigmoid", "tanh",
    "leaky_relu", "relu", "nearest_upsample_2x", "mlp", "grid_sample_bilinear", "upsample_flow_2x",
    "detach", "unbroadcast",
]
