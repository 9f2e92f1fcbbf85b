"""Parameter containers and the small set of layers the networks are built from."""
import numpy as np

from . import functional as F
from .tensor import Tensor


class Parameter(Tensor):
    """Trainable tensor carrying its checkpoint name and Adam moments."""

    __slots__ = ("name", "m", "v", "step")

    def __init__(self, data, name=""):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.m = np.zeros_like(self.data)
        self.v = np.zeros_like(self.data)
        self.step = 0

    def astype(self, dtype):
        self.data = self.data.astype(dtype)
        self.m = self.m.astype(dtype)
        self.v = self.v.astype(dtype)
        if self.grad is not None:
            self.grad = self.grad.astype(dtype)


class Module:
    def named_parameters(self, prefix=""):
        for key, val in vars(self).items():
            path = f"{prefix}{key}"
            if isinstance(val, Parameter):
                yield path, val
            elif isinstance(val, Module):
                yield from val.named_parameters(path + ".")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{i}.")
                    elif isinstance(item, Parameter):
                        yield f"{path}.{i}", item

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def assign_names(self, prefix=""):
        for name, p in self.named_parameters(prefix):
            p.name = name
        return self

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def astype(self, dtype):
        for p in self.parameters():
            p.astype(dtype)
        return self

    def set_requires_grad(self, flag):
        for p in self.parameters():
            p.requires_grad = flag
        return self

    def freeze(self):
        return self.set_requires_grad(False)

    def num_parameters(self):
        return sum(p.size for p in self.parameters())

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def _uniform(rng, shape, fan_in, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Linear(Module):
    def __init__(self, d_in, d_out, rng, bias=True, dtype=np.float32):
        self.weight = Parameter(_uniform(rng, (d_in, d_out), d_in, dtype))
        self.bias = Parameter(np.zeros(d_out, dtype=dtype)) if bias else None

    def forward(self, x):
        return F.linear(x, self.weight, self.bias)


class Conv2d(Module):
    def __init__(self, c_in, c_out, k, rng, stride=1, pad=None, bias=True, zero_init=False, dtype=np.float32):
        shape = (c_out, c_in, k, k)
        w = np.zeros(shape, dtype=dtype) if zero_init else _uniform(rng, shape, c_in * k * k, dtype)
        self.weight = Parameter(w)
        self.bias = Parameter(np.zeros(c_out, dtype=dtype)) if bias else None
        self.stride = stride
        self.pad = k // 2 if pad is None else pad

    def forward(self, x):
        return F.conv2d(x, self.weight, self.bias, stride=self.stride, pad=self.pad)


class DepthwiseConv2d(Module):
    def __init__(self, channels, rng, k=3, dtype=np.float32):
        self.weight = Parameter(_uniform(rng, (channels, k, k), k * k, dtype))
        self.bias = Parameter(np.zeros(channels, dtype=dtype))

    def forward(self, x):
        return F.depthwise_conv2d(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, dim, eps=1e-5, dtype=np.float32):
        self.gamma = Parameter(np.ones(dim, dtype=dtype))
        self.beta = Parameter(np.zeros(dim, dtype=dtype))
        self.eps = eps

    def forward(self, x):
        return F.layer_norm(x, self.gamma, self.beta, axis=-1, eps=self.eps)


class Mlp(Module):
    def __init__(self, dim, hidden, rng, dim_out=None, dtype=np.float32):
        self.fc1 = Linear(dim, hidden, rng, dtype=dtype)
        self.fc2 = Linear(hidden, dim_out or dim, rng, dtype=dtype)

    def forward(self, x):
        return F.mlp(x, self.fc1.weight, self.fc1.bias, self.fc2.weight, self.fc2.bias)


def tokens_to_map(x, h, w):
    """(B, h*w, C) -> (B, C, h, w)."""
    B, _, C = x.shape
    return x.reshape(B, h, w, C).permute(0, 3, 1, 2)


def map_to_tokens(x):
    """(B, C, h, w) -> (B, h*w, C)."""
    B, C, h, w = x.shape
    return x.permute(0, 2, 3, 1).reshape(B, h * w, C)
