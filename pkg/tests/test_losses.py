import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motion_transfer.autograd.module import Conv2d, Module
from motion_transfer.autograd.tensor import Tensor
from motion_transfer.errors import ArgumentError, DimensionError
from motion_transfer.losses import (Discriminator, FeatureExtractor, LossWeights, feature_matching_loss, gram,
                                    hinge_adversarial, mask_loss, mutual_learning_loss, reconstruction_loss,
                                    soft_argmax_2d, style_loss, total_loss, tv_loss)
from oracles import gram_oracle, hard_mutual_oracle


# -- soft argmax ---------------------------------------------------------------

def test_soft_argmax_one_hot():
    scores = np.zeros(9)
    scores[5] = 1.0
    for temp in (1e3, 1e4):
        y, x = soft_argmax_2d(Tensor(scores), 3, 3, temp)
        assert abs(float(y.data) - 1.0) < 1e-9 and abs(float(x.data) - 2.0) < 1e-9


def test_soft_argmax_uniform_is_centroid():
    y, x = soft_argmax_2d(Tensor(np.zeros(9)), 3, 3, 200.0)
    assert float(y.data) == pytest.approx(1.0) and float(x.data) == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_soft_argmax_tracks_hard_argmax_on_cosine_scores(seed):
    # scores are cosine similarities of a row against a random bank that contains it
    rng = np.random.default_rng(seed)
    bank = rng.standard_normal((16, 8))
    bank /= np.linalg.norm(bank, axis=1, keepdims=True)
    i = rng.integers(16)
    scores = bank @ bank[i]
    y, x = soft_argmax_2d(Tensor(scores), 4, 4, 200.0)
    j = int(np.argmax(scores))
    assert abs(float(y.data) - j // 4) < 0.05 and abs(float(x.data) - j % 4) < 0.05


def test_soft_argmax_errors():
    with pytest.raises(ArgumentError):
        soft_argmax_2d(Tensor(np.zeros(9)), 3, 3, 0.0)
    with pytest.raises(DimensionError):
        soft_argmax_2d(Tensor(np.zeros(8)), 3, 3)


# -- mutual loss ---------------------------------------------------------------

@pytest.mark.parametrize("hw", [4, 8])
def test_mutual_loss_identical_pair(hw):
    rng = np.random.default_rng(hw)
    o = rng.standard_normal((2, 16, hw, hw))
    assert hard_mutual_oracle(o, o) == 0.0
    loss = float(mutual_learning_loss([(Tensor(o), Tensor(o))], 200.0).data)
    assert 0.0 <= loss < 0.01 * hw * hw


def test_mutual_loss_reversed_pair_is_larger():
    rng = np.random.default_rng(0)
    o = rng.standard_normal((1, 16, 8, 8))
    rev = o[:, :, ::-1, ::-1].copy()
    aligned = float(mutual_learning_loss([(Tensor(o), Tensor(o))]).data)
    reversed_ = float(mutual_learning_loss([(Tensor(o), Tensor(rev))]).data)
    assert reversed_ > aligned
    assert reversed_ == pytest.approx(hard_mutual_oracle(o, rev), rel=0.02)


@pytest.mark.parametrize("alpha", [0.5, 2.0, 10.0])
def test_mutual_loss_scale_invariance(alpha):
    rng = np.random.default_rng(1)
    a, g = rng.standard_normal((2, 8, 4, 4)), rng.standard_normal((2, 8, 4, 4))
    base = float(mutual_learning_loss([(Tensor(a), Tensor(g))]).data)
    assert abs(float(mutual_learning_loss([(Tensor(alpha * a), Tensor(g))]).data) - base) < 1e-6
    assert abs(float(mutual_learning_loss([(Tensor(a), Tensor(alpha * g))]).data) - base) < 1e-6


def test_mutual_loss_sums_stages_and_is_nonnegative():
    rng = np.random.default_rng(2)
    pairs = [(Tensor(rng.standard_normal((1, 8, s, s))), Tensor(rng.standard_normal((1, 8, s, s))))
             for s in (2, 4)]
    total = float(mutual_learning_loss(pairs).data)
    parts = [float(mutual_learning_loss([p]).data) for p in pairs]
    assert total >= 0 and total == pytest.approx(sum(parts))


def test_mutual_loss_shape_mismatch():
    with pytest.raises(DimensionError):
        mutual_learning_loss([(Tensor(np.ones((1, 4, 2, 2))), Tensor(np.ones((1, 4, 2, 3))))])


# -- perceptual terms ----------------------------------------------------------

class OneTap(Module):
    """Single 1x1 conv tap, no activation."""

    def __init__(self):
        self.conv = Conv2d(3, 2, 1, np.random.default_rng(0), pad=0, dtype=np.float64)
        self.conv.weight.data = np.arange(6.0).reshape(2, 3, 1, 1) / 6.0
        self.conv.bias.data = np.array([0.5, -0.5])

    def forward(self, x):
        return [self.conv(x)]


def test_reconstruction_identity_symmetry_and_manual():
    rng = np.random.default_rng(0)
    a, b = rng.uniform(-1, 1, (1, 3, 4, 4)), rng.uniform(-1, 1, (1, 3, 4, 4))
    fx = OneTap()
    assert float(reconstruction_loss(Tensor(a), Tensor(a), fx).data) == 0.0
    ab = float(reconstruction_loss(Tensor(a), Tensor(b), fx).data)
    assert ab == float(reconstruction_loss(Tensor(b), Tensor(a), fx).data)
    wmat = np.arange(6.0).reshape(2, 3) / 6.0
    fa = np.einsum("oc,bchw->bohw", wmat, a)
    fb = np.einsum("oc,bchw->bohw", wmat, b)
    assert ab == pytest.approx(np.abs(fa - fb).mean(), abs=1e-12)


def test_reconstruction_shape_mismatch():
    with pytest.raises(DimensionError):
        reconstruction_loss(Tensor(np.zeros((1, 3, 4, 4))), Tensor(np.zeros((1, 3, 4, 8))), OneTap())


def test_gram_examples():
    np.testing.assert_array_equal(gram(Tensor(np.ones((1, 1, 2, 2)))).data, [[[4.0]]])
    rng = np.random.default_rng(0)
    f = rng.standard_normal((2, 3, 4, 5))
    g = gram(Tensor(f)).data
    np.testing.assert_allclose(g, g.transpose(0, 2, 1))
    ref = gram_oracle(f)
    assert np.abs(g - ref).max() < 1e-6


class Identity(Module):
    def forward(self, x):
        return [x]


def test_style_loss_manual_and_permutation_invariance():
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((1, 3, 4, 4)), rng.standard_normal((1, 3, 4, 4))
    fx = Identity()
    loss = float(style_loss(Tensor(a), Tensor(b), fx, normalize=False).data)
    ga, gb = (x.reshape(3, 16) @ x.reshape(3, 16).T for x in (a, b))
    assert loss == pytest.approx(np.abs(ga - gb).sum() / 9)
    normed = float(style_loss(Tensor(a), Tensor(b), fx).data)
    assert normed == pytest.approx(loss / 16)
    perm = rng.permutation(16)
    shuf = lambda x: x.reshape(1, 3, 16)[:, :, perm].reshape(1, 3, 4, 4)  # noqa: E731
    assert float(style_loss(Tensor(shuf(a)), Tensor(shuf(b)), fx).data) == pytest.approx(normed)
    assert float(style_loss(Tensor(shuf(a)), Tensor(a), fx).data) == pytest.approx(0.0, abs=1e-12)


def test_feature_matching_identity_and_manual():
    rng = np.random.default_rng(0)
    d = Discriminator(3 + 26, (4, 6, 8, 8), seed=3, dtype=np.float64)
    img, other = rng.uniform(-1, 1, (1, 3, 32, 32)), rng.uniform(-1, 1, (1, 3, 32, 32))
    pose = rng.uniform(0, 1, (1, 26, 32, 32))
    assert float(feature_matching_loss(d, Tensor(img), Tensor(img), Tensor(pose)).data) == 0.0
    got = float(feature_matching_loss(d, Tensor(other), Tensor(img), Tensor(pose)).data)

    def taps(x):
        out, h = [], np.concatenate([x, pose], axis=1)
        for conv in d.convs[:3]:
            h = conv(Tensor(h)).data
            h = np.where(h > 0, h, 0.2 * h)
            out.append(h)
        return out

    ref = sum(np.abs(p - q).mean() for p, q in zip(taps(other), taps(img)))
    assert got > 0 and got == pytest.approx(ref, rel=1e-10)


def test_feature_matching_real_side_is_detached():
    rng = np.random.default_rng(0)
    d = Discriminator(3 + 26, (4, 4, 4, 4), seed=3, dtype=np.float64)
    real = Tensor(rng.uniform(-1, 1, (1, 3, 16, 16)), requires_grad=True)
    fake = Tensor(rng.uniform(-1, 1, (1, 3, 16, 16)), requires_grad=True)
    feature_matching_loss(d, fake, real, Tensor(np.zeros((1, 26, 16, 16)))).backward()
    assert fake.grad is not None and np.abs(fake.grad).sum() > 0
    assert real.grad is None or not np.any(real.grad)


def test_hinge_closed_forms():
    ones = np.ones((2, 1, 3, 3))
    loss_d, _ = hinge_adversarial(Tensor(ones), Tensor(-ones))
    assert float(loss_d.data) == 0.0
    loss_d, loss_g = hinge_adversarial(Tensor(0 * ones), Tensor(0 * ones))
    assert float(loss_d.data) == 2.0
    fake = np.random.default_rng(0).standard_normal((2, 1, 3, 3))
    _, loss_g = hinge_adversarial(Tensor(ones), Tensor(fake))
    assert float(loss_g.data) == pytest.approx(-fake.mean(), rel=1e-14)


def test_tv_closed_forms():
    flow = np.zeros((1, 2, 5, 7))
    flow[:, 0], flow[:, 1] = 3.0, -2.0
    assert float(tv_loss(Tensor(flow)).data) == 0.0
    flow[:, 0] = np.arange(7.0)[None, :]
    # x channel: unit horizontal steps, (W-1)*H of them; no vertical change
    assert float(tv_loss(Tensor(flow)).data) == pytest.approx((7 - 1) * 5 / (5 * 7))
    rng = np.random.default_rng(0)
    assert float(tv_loss(Tensor(rng.standard_normal((2, 2, 4, 4)))).data) >= 0


def test_mask_loss_values():
    rng = np.random.default_rng(0)
    a, b = rng.random((2, 1, 4, 4)), rng.random((2, 1, 4, 4))
    assert float(mask_loss(Tensor(a), Tensor(a)).data) == 0.0
    assert float(mask_loss(Tensor(np.ones((1, 1, 3, 3))), Tensor(np.zeros((1, 1, 3, 3)))).data) == 1.0
    assert float(mask_loss(Tensor(a), Tensor(b)).data) == pytest.approx(np.abs(a - b).mean())
    with pytest.raises(DimensionError):
        mask_loss(Tensor(a), Tensor(np.ones((2, 1, 4, 5))))


def test_total_loss_weighting():
    names = ("rec", "fm", "adv_g", "mutual", "tv", "mask", "style")
    ones = {k: Tensor(np.array(1.0)) for k in names}
    assert float(total_loss(**ones).total.data) == 33.5
    zeros = {k: Tensor(np.array(0.0)) for k in names}
    assert float(total_loss(**zeros).total.data) == 0.0
    vals = {k: Tensor(np.array(v)) for k, v in zip(names, (0.3, 0.2, -1.5, 4.0, 0.7, 0.1, 0.05))}
    base = float(total_loss(**vals).total.data)
    dropped = dict(vals, tv=Tensor(np.array(123.0)))
    w0 = LossWeights(tv=0.0)
    assert float(total_loss(**dropped, weights=w0).total.data) == pytest.approx(base - 0.5 * 0.7)
    bundle = total_loss(**vals, adv_d=Tensor(np.array(9.0)))
    assert bundle.scalars()["adv_d"] == 9.0 and float(bundle.total.data) == base


def test_loss_weights_reject_negative():
    with pytest.raises(ArgumentError):
        LossWeights(mutual=-1.0)


def test_feature_extractor_is_frozen_with_decreasing_taps():
    fx = FeatureExtractor()
    assert all(not p.requires_grad for p in fx.parameters())
    taps = fx(Tensor(np.zeros((1, 3, 32, 32), dtype=np.float32)))
    assert len(taps) == 5
    sizes = [t.shape[-1] for t in taps]
    assert all(a > b for a, b in zip(sizes, sizes[1:]))
    again = FeatureExtractor()
    for p, q in zip(fx.parameters(), again.parameters()):
        np.testing.assert_array_equal(p.data, q.data)


def test_discriminator_exposes_three_taps():
    d = Discriminator(3 + 26, (8, 8, 8, 8))
    logits, taps = d(Tensor(np.zeros((1, 3, 32, 32), dtype=np.float32)),
                     Tensor(np.zeros((1, 26, 32, 32), dtype=np.float32)))
    assert len(taps) >= 3 and logits.shape[1] == 1
