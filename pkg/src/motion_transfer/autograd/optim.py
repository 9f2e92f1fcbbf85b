import numpy as np

from ..errors import StateError

BETA1 = 0.0
BETA2 = 0.99
EPS = 1e-8


def adam_step(params, lr, beta1=BETA1, beta2=BETA2, eps=EPS):
    """In-place bias-corrected Adam update. Gradients are left for the caller to clear."""
    for p in params:
        if p.grad is None:
            raise StateError(f"parameter {p.name or '<unnamed>'} has no gradient")
    for p in params:
        g = p.grad
        p.step += 1
        p.m *= beta1
        p.m += (1.0 - beta1) * g
        p.v *= beta2
        p.v += (1.0 - beta2) * g * g
        m_hat = p.m / (1.0 - beta1 ** p.step)
        v_hat = p.v / (1.0 - beta2 ** p.step)
        p.data -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.dtype)


def linear_decay_lr(base_lr, epoch, total_epochs, decay_start):
    """Constant through ``decay_start`` (1-based epochs), then linear to 0 at ``total_epochs``."""
    if epoch <= decay_start or total_epochs <= decay_start:
        return base_lr
    return base_lr * max(total_epochs - epoch, 0) / (total_epochs - decay_start)
