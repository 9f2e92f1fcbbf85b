import numpy as np
import pytest

from motion_transfer.autograd.gradcheck import check_gradients, numerical_grad, relative_error
from motion_transfer.autograd.tensor import Tensor, mul, reduce_sum
from motion_transfer.errors import ArgumentError
from motion_transfer.gradsuite import TOLERANCE, all_cases

CASES = all_cases(seed=1)


@pytest.mark.parametrize("case", CASES, ids=[c[0] for c in CASES])
def test_case_passes_gradcheck(case):
    name, fn, inputs, max_elements = case
    err = check_gradients(fn, inputs, max_elements=max_elements, rng=np.random.default_rng(1))
    assert err < TOLERANCE, f"{name}: {err:.3e}"


def test_suite_covers_every_layer_and_loss():
    names = {c[0] for c in CASES}
    for required in ("matmul", "conv2d", "layer_norm", "softmax", "gelu", "grid_sample", "cswin_self_attention",
                     "cswin_cross_attention", "decoder_block", "fusion_block", "mutual", "style", "hinge", "tv"):
        assert any(n.startswith(required) for n in names), required


def test_injected_fault_is_caught():
    cases = {c[0]: c for c in all_cases(seed=0, inject_fault=True)}
    sig = [c for n, c in cases.items() if "sigmoid" in n]
    assert sig
    for name, fn, inputs, max_elements in sig:
        assert check_gradients(fn, inputs, max_elements=max_elements) > TOLERANCE


def test_checker_requires_float64():
    with pytest.raises(ArgumentError):
        check_gradients(lambda a: reduce_sum(a), [Tensor(np.ones(3, dtype=np.float32))])


def test_numerical_grad_of_quadratic():
    x = Tensor(np.array([1.0, -2.0, 0.5]))
    (g,) = numerical_grad(lambda a: reduce_sum(mul(a, a)), [x])
    np.testing.assert_allclose(g, 2 * x.data, atol=1e-8)
    assert relative_error(np.array([1.0]), np.array([1.0])) == 0.0

