import numpy as np
import pytest

from motion_transfer.attention import AttentionConfig
from motion_transfer.autograd import functional as F
from motion_transfer.autograd.gradcheck import check_gradients
from motion_transfer.autograd.tensor import Tensor, add, mul, reduce_sum
from motion_transfer.decoder import (DecoderBlock, DecoderConfig, FusionBlock, blend_branches,
                                     composite_background)
from motion_transfer.encoder import Encoder, EncoderBlock, EncoderConfig, StageTransition, encode
from motion_transfer.errors import DimensionError
from motion_transfer.model import Generator, toy_config

F64 = np.float64


def small_encoder_cfg(in_ch=3, stripe_widths=(1, 1, 1)):
    return EncoderConfig(in_ch, [1, 1, 2], [16, 32, 64], [2, 4, 8], list(stripe_widths))


# -- encoder -------------------------------------------------------------------

def test_encoder_block_zero_input_zero_projections():
    blk = EncoderBlock(AttentionConfig(8, 2, 1), np.random.default_rng(0), dtype=F64)
    for p in blk.parameters():
        if not p.name.endswith("gamma"):
            p.data[...] = 0.0
    for name, p in blk.named_parameters():
        if name.endswith("weight") or name.endswith("bias") or name.endswith("beta"):
            p.data[...] = 0.0
    out = blk(Tensor(np.zeros((1, 16, 8))), 4, 4)
    np.testing.assert_array_equal(out.data, 0.0)


def test_encoder_block_shape_and_gradient():
    rng = np.random.default_rng(1)
    blk = EncoderBlock(AttentionConfig(8, 2, 2), rng, dtype=F64)
    x = Tensor(rng.standard_normal((1, 16, 8)))
    assert blk(x, 4, 4).shape == (1, 16, 8)
    r = Tensor(rng.standard_normal((1, 16, 8)))
    err = check_gradients(lambda a, *_: reduce_sum(mul(blk(a, 4, 4), r)), [x] + blk.parameters(),
                          max_elements=16)
    assert err < 1e-4


def test_stage_transition_shapes_and_constant_map():
    rng = np.random.default_rng(0)
    tr = StageTransition(4, 6, rng, dtype=F64)
    y, h, w = tr(Tensor(rng.standard_normal((1, 64, 4))), 8, 8)
    assert (y.shape, h, w) == ((1, 16, 6), 4, 4)
    tr.conv.weight.data[...] = 1.0 / (4 * 9)
    tr.conv.bias.data[...] = 0.0
    const = tr(Tensor(np.full((1, 64, 4), 3.0)), 8, 8)[0].data.reshape(4, 4, 6)
    # interior outputs see a full 3x3 window of the constant
    np.testing.assert_allclose(const[1:, 1:], 3.0)


def test_stage_transition_odd_extent():
    tr = StageTransition(4, 6, np.random.default_rng(0))
    with pytest.raises(DimensionError):
        tr(Tensor(np.zeros((1, 15, 4))), 5, 3)


@pytest.mark.parametrize("size", [64, 256])
def test_pyramid_resolutions(size):
    cfg = EncoderConfig(3, [1, 1, 1], [8, 16, 32], [2, 2, 2], [1, 2, 4])
    enc = Encoder(cfg, np.random.default_rng(0))
    pyr = encode(Tensor(np.zeros((1, 3, size, size), dtype=np.float32)), enc)
    assert [(h, w) for _, h, w in pyr] == [(size // 4,) * 2, (size // 8,) * 2, (size // 16,) * 2]
    assert [t.shape[-1] for t, _, _ in pyr] == [8, 16, 32]


def test_encoder_rejects_indivisible_input():
    enc = Encoder(small_encoder_cfg(), np.random.default_rng(0))
    with pytest.raises(DimensionError, match="16"):
        enc(Tensor(np.zeros((1, 3, 40, 40), dtype=np.float32)))


def test_encoder_deterministic():
    rng = np.random.default_rng(0)
    enc = Encoder(small_encoder_cfg(), rng)
    x = Tensor(rng.standard_normal((1, 3, 32, 32)).astype(np.float32))
    a, b = enc(x), enc(x)
    for (ta, _, _), (tb, _, _) in zip(a, b):
        assert np.array_equal(ta.data, tb.data)


def test_source_and_pose_encoders_share_no_weights():
    gen = Generator(toy_config())
    src = {n for n, _ in gen.enc_src.named_parameters()}
    pose = {n for n, _ in gen.enc_pose.named_parameters()}
    assert src == pose  # same architecture ...
    src_ids = {id(p) for p in gen.enc_src.parameters()}
    assert not src_ids & {id(p) for p in gen.enc_pose.parameters()}  # ... separate tensors
    full = {p.name for p in gen.enc_src.parameters()} & {p.name for p in gen.enc_pose.parameters()}
    assert not full


def test_encoder_end_to_end_gradient():
    rng = np.random.default_rng(2)
    enc = Encoder(small_encoder_cfg(), rng, dtype=F64)
    x = Tensor(rng.standard_normal((1, 3, 16, 16)))
    rs = [Tensor(rng.standard_normal(t.shape)) for t, _, _ in enc(x)]

    def fn(img, *_):
        pyr = enc(img)
        total = reduce_sum(mul(pyr.f1[0], rs[0]))
        for (t, _, _), r in zip(pyr[1:], rs[1:]):
            total = add(total, reduce_sum(mul(t, r)))
        return total

    assert check_gradients(fn, [x] + enc.parameters(), max_elements=6) < 1e-4


# -- decoder block -------------------------------------------------------------

def test_zero_flow_head_gives_identity_warp():
    rng = np.random.default_rng(0)
    blk = DecoderBlock(AttentionConfig(16, 2, 2), rng, dtype=F64)
    s = Tensor(rng.standard_normal((2, 16, 16)))
    out = blk(Tensor(rng.standard_normal((2, 16, 16))), s, Tensor(np.zeros((2, 2, 4, 4))), 4, 4)
    s_map = s.data.transpose(0, 2, 1).reshape(2, 16, 4, 4)
    assert np.abs(out.o_w.data - s_map).max() <= 1e-6
    assert out.o_w.shape == out.o_g.shape == (2, 16, 4, 4)
    assert out.x.shape == (2, 16, 16)


def test_decoder_block_resolution_mismatch():
    blk = DecoderBlock(AttentionConfig(16, 2, 2), np.random.default_rng(0))
    with pytest.raises(DimensionError):
        blk(Tensor(np.zeros((1, 16, 16))), Tensor(np.zeros((1, 64, 16))), Tensor(np.zeros((1, 2, 4, 4))), 4, 4)


def test_decoder_block_full_gradient():
    rng = np.random.default_rng(3)
    blk = DecoderBlock(AttentionConfig(16, 2, 2), rng, dtype=F64)
    for p in blk.parameters():
        p.data = rng.standard_normal(p.shape) * 0.2
    x, s = Tensor(rng.standard_normal((1, 16, 16))), Tensor(rng.standard_normal((1, 16, 16)))
    flow = Tensor(rng.uniform(0.1, 0.4, size=(1, 2, 4, 4)))
    rx, rw = Tensor(rng.standard_normal((1, 16, 16))), Tensor(rng.standard_normal((1, 16, 4, 4)))

    def fn(a, b, f, *_):
        out = blk(a, b, f, 4, 4)
        return add(reduce_sum(mul(out.x, rx)), reduce_sum(mul(out.o_w, rw)))

    assert check_gradients(fn, [x, s, flow] + blk.parameters(), max_elements=8) < 1e-4


# -- full decoder / fusion / generator ----------------------------------------

@pytest.fixture(scope="module")
def toy_forward():
    rng = np.random.default_rng(0)
    gen = Generator(toy_config())
    src = Tensor(rng.uniform(-1, 1, (2, 3, 64, 64)).astype(np.float32))
    pose = Tensor(rng.uniform(0, 1, (2, 26, 64, 64)).astype(np.float32))
    return gen, src, pose, gen(src, pose)


def test_decode_shapes(toy_forward):
    _, _, _, out = toy_forward
    assert out.o_de.shape[2:] == (16, 16)
    assert out.f3.shape == (2, 2, 16, 16)
    assert [o_w.shape[2:] for o_w, _ in out.branch_pairs] == [(4, 4), (8, 8), (16, 16)]
    for o_w, o_g in out.branch_pairs:
        assert o_w.shape == o_g.shape


def test_zero_flow_heads_make_every_warp_identity(toy_forward):
    gen, src, pose, out = toy_forward
    np.testing.assert_array_equal(out.f3.data, 0.0)
    np.testing.assert_array_equal(out.f_f.data, 0.0)
    src_pyr = gen.enc_src(src)
    for (o_w, _), (s, h, w) in zip(out.branch_pairs, (src_pyr.f3, src_pyr.f2, src_pyr.f1)):
        s_map = s.data.transpose(0, 2, 1).reshape(o_w.shape)
        assert np.abs(o_w.data - s_map).max() <= 1e-6


def test_zero_flow_output_is_mask_blend(toy_forward):
    _, src, _, out = toy_forward
    expected = out.m_f.data * src.data + (1 - out.m_f.data) * out.i_f.data
    np.testing.assert_allclose(out.i_out.data, expected, atol=1e-6)


def test_ranges(toy_forward):
    _, _, _, out = toy_forward
    assert ((out.m_f.data > 0) & (out.m_f.data < 1)).all()
    assert ((out.m_out.data > 0) & (out.m_out.data < 1)).all()
    assert ((out.i_f.data > -1) & (out.i_f.data < 1)).all()
    assert (np.abs(out.i_out.data) <= 1).all()


def test_every_parameter_gets_a_gradient(toy_forward):
    gen, src, pose, _ = toy_forward
    gen.zero_grad()
    out = gen(src, pose)
    loss = add(reduce_sum(out.i_out), reduce_sum(out.m_out))
    for o_w, o_g in out.branch_pairs:
        loss = add(loss, add(reduce_sum(mul(o_w, o_w)), reduce_sum(o_g)))
    loss.backward()
    missing = [p.name for p in gen.parameters() if p.grad is None]
    assert not missing


def test_decoder_pyramid_mismatch():
    gen = Generator(toy_config(stripe_widths=[1, 1, 1]))
    rng = np.random.default_rng(0)
    a = gen.enc_src(Tensor(rng.standard_normal((1, 3, 64, 64)).astype(np.float32)))
    b = gen.enc_pose(Tensor(rng.standard_normal((1, 26, 32, 32)).astype(np.float32)))
    with pytest.raises(DimensionError):
        gen.decoder(a, b)


def test_forced_mask_and_flow_identities():
    rng = np.random.default_rng(0)
    src = Tensor(rng.uniform(-1, 1, (1, 3, 8, 8)))
    gen_img = Tensor(rng.uniform(-1, 1, (1, 3, 8, 8)))
    zero = Tensor(np.zeros((1, 2, 8, 8)))
    np.testing.assert_allclose(blend_branches(src, zero, Tensor(np.ones((1, 1, 8, 8))), gen_img).data, src.data)
    np.testing.assert_allclose(blend_branches(src, zero, Tensor(np.zeros((1, 1, 8, 8))), gen_img).data,
                               gen_img.data)


def test_fusion_resolution_mismatch():
    fus = FusionBlock(8, np.random.default_rng(0))
    with pytest.raises(DimensionError):
        fus(Tensor(np.zeros((1, 8, 4, 4), dtype=np.float32)), Tensor(np.zeros((1, 2, 4, 4), dtype=np.float32)),
            Tensor(np.zeros((1, 3, 32, 32), dtype=np.float32)))


def test_composite_background():
    i_out, bg = Tensor(np.ones((1, 3, 4, 4))), Tensor(np.zeros((1, 3, 4, 4)))
    np.testing.assert_array_equal(composite_background(i_out, Tensor(np.ones((1, 1, 4, 4))), bg).data, 1.0)
    np.testing.assert_array_equal(composite_background(i_out, Tensor(np.zeros((1, 1, 4, 4))), bg).data, 0.0)
    np.testing.assert_array_equal(composite_background(i_out, Tensor(np.full((1, 1, 4, 4), 0.5)), bg).data, 0.5)
    with pytest.raises(DimensionError):
        composite_background(i_out, Tensor(np.ones((1, 1, 4, 4))), Tensor(np.zeros((1, 3, 4, 5))))


def test_dense_cross_attention_switch_runs():
    gen = Generator(toy_config(dense_cross_attention=True, dec_depths=[1, 1, 1], enc_depths=[1, 1, 1]))
    out = gen(Tensor(np.zeros((1, 3, 64, 64), dtype=np.float32)), Tensor(np.zeros((1, 26, 64, 64), np.float32)))
    assert out.i_out.shape == (1, 3, 64, 64)
    assert gen.decoder.stage1[0].warp_attn.cfg.dense


def test_decoder_config_validation():
    from motion_transfer.errors import ConfigError
    with pytest.raises(ConfigError):
        DecoderConfig(stage_depths=[1, 0, 1])
    with pytest.raises(ConfigError):
        DecoderConfig(stage_depths=[1, 1])


def test_flow_upsampling_in_decoder_path_is_pixel_consistent():
    flow = Tensor(np.stack([np.full((4, 4), 0.5), np.full((4, 4), -1.0)])[None])
    up = F.upsample_flow_2x(flow).data
    assert (up[0, 0] == 1.0).all() and (up[0, 1] == -2.0).all()
