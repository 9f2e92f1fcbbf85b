"""Central finite-difference gradient checking."""
import numpy as np

from ..errors import ArgumentError
from .tensor import Tensor


def numerical_grad(fn, inputs, h=1e-5, indices=None):
    """Central differences of scalar ``fn(*inputs)`` w.r.t. the elements of every input.

    ``indices`` optionally lists, per input, the flat element positions to
    probe; unprobed entries are left at zero.
    """
    grads = []
    for n, t in enumerate(inputs):
        g = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in (range(flat.size) if indices is None else indices[n]):
            orig = flat[i]
            flat[i] = orig + h
            fp = float(fn(*inputs).data)
            flat[i] = orig - h
            fm = float(fn(*inputs).data)
            flat[i] = orig
            gflat[i] = (fp - fm) / (2 * h)
        grads.append(g)
    return grads


def analytic_grad(fn, inputs):
    for t in inputs:
        t.grad = None
    fn(*inputs).backward()
    return [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs]


def relative_error(analytic, numeric, floor=None):
    """Max elementwise |a - n| / max(|a|, |n|, floor).

    ``floor`` defaults to 1e-3 * max|n|; it keeps elements whose true gradient
    is numerically zero from dominating the ratio.
    """
    if floor is None:
        floor = 1e-3 * float(np.abs(numeric).max(initial=0.0))
    floor = max(floor, 1e-10)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float((np.abs(analytic - numeric) / denom).max(initial=0.0))


def check_gradients(fn, inputs, h=1e-5, max_elements=None, rng=None):
    """Largest relative error over all inputs of ``fn`` (which must return a scalar Tensor).

    With ``max_elements`` each input larger than that is probed at a random
    subset of that many positions, which keeps whole-layer checks cheap.
    """
    for t in inputs:
        if not isinstance(t, Tensor) or t.dtype != np.float64:
            raise ArgumentError("gradient checks run on float64 tensors")
        t.data = np.ascontiguousarray(t.data)
        t.requires_grad = True
    indices = None
    if max_elements is not None:
        rng = np.random.default_rng(0) if rng is None else rng
        indices = [np.arange(t.size) if t.size <= max_elements
                   else np.sort(rng.choice(t.size, max_elements, replace=False)) for t in inputs]
    ana = analytic_grad(fn, inputs)
    num = numerical_grad(fn, inputs, h, indices)
    if indices is not None:
        ana = [a.reshape(-1)[i] for a, i in zip(ana, indices)]
        num = [g.reshape(-1)[i] for g, i in zip(num, indices)]
    # one floor for the whole function, so an input whose true gradient is
    # identically zero (e.g. a key bias under softmax) is judged on the global scale
    floor = 1e-3 * max(float(np.abs(n).max(initial=0.0)) for n in num)
    return max(relative_error(a, n, floor) for a, n in zip(ana, num))


def random_projection(shape, rng):
    """Fixed random weights turning a tensor output into a scalar for checking."""
    return Tensor(rng.standard_normal(shape))
