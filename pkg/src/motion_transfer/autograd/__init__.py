from . import functional
from .checkpoint import load_into, read_checkpoint, save_checkpoint
from .gradcheck import check_gradients
from .module import Conv2d, DepthwiseConv2d, LayerNorm, Linear, Mlp, Module, Parameter
from .optim import adam_step, linear_decay_lr
from .tensor import (Tensor, abs, add, build_tape, concat, div, exp, getitem, log, matmul, maximum,
                     minimum, mul, pad, permute, reduce_mean, reduce_sum, reshape, scale, split, sqrt,
                     square, stop_gradient, sub)

__all__ = [
    "functional", "load_into", "read_checkpoint", "save_checkpoint", "check_gradients", "Conv2d",
    "DepthwiseConv2d", "LayerNorm", "Linear", "Mlp", "Module", "Parameter", "adam_step", "linear_decay_lr",
    "Tensor", "abs", "add", "build_tape", "concat", "div", "exp", "getitem", "log", "matmul", "maximum",
    "minimum", "mul", "pad", "permute", "reduce_mean", "reduce_sum", "reshape", "scale", "split", "sqrt",
    "square", "stop_gradient", "sub",
]
