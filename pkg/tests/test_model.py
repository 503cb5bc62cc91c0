"""Encoder-decoder, NAFG, AFFM and the assembled network."""

import numpy as np
import pytest

from mhnet.blocks import naf_block
from mhnet.model import (
    AFFMParams,
    EncoderDecoderParams,
    MHNet,
    ModelConfig,
    NAFGParams,
    affm,
    encoder_decoder,
    nafg,
    toy_config,
)
from mhnet.tensor import ShapeError, Tensor, gradcheck, mean_all, mul

RNG = np.random.default_rng(41)


def _rand(shape, scale=1.0):
    return Tensor((scale * RNG.standard_normal(shape)).astype(np.float32))


def _zero_all_block_projections(p: EncoderDecoderParams):
    for blocks in p.enc_levels + p.dec_levels:
        for b in blocks:
            b.zero_projections_()
    for m in p.middles:
        m.out_proj.zero_()
    for up in p.ups:
        up.zero_()


class TestEncoderDecoder:
    def test_zeroed_projections_give_identity(self):
        cfg = toy_config(width=8)
        p = EncoderDecoderParams.create(cfg, np.random.default_rng(1))
        _zero_all_block_projections(p)
        x0 = _rand((1, 8, 32, 32))
        d4, feats = encoder_decoder(x0, p)
        assert np.array_equal(d4.data, x0.data)

    def test_level_shapes(self):
        cfg = ModelConfig(width=8, enc_blocks=(1, 1, 1, 1), dec_blocks=(1, 1, 1, 1),
                          nafblocks_per_nafg=1)
        p = EncoderDecoderParams.create(cfg, np.random.default_rng(2))
        x0 = _rand((1, 8, 64, 64))
        d4, feats = encoder_decoder(x0, p)
        assert d4.shape == (1, 8, 64, 64)
        widths = [f.shape[1] for f in feats.enc]
        spatial = [f.shape[2] for f in feats.enc]
        assert widths == [8, 16, 32, 64]
        assert spatial == [64, 32, 16, 8]
        # decoding order: D1 deepest, D4 at full resolution
        assert [f.shape[1] for f in feats.dec] == [64, 32, 16, 8]

    def test_indivisible_spatial_rejected(self):
        cfg = toy_config(width=8)
        p = EncoderDecoderParams.create(cfg, np.random.default_rng(3))
        with pytest.raises(ShapeError):
            encoder_decoder(_rand((1, 8, 24, 32)), p)

    def test_gradcheck_width4_single_blocks(self):
        cfg = ModelConfig(width=4, enc_blocks=(1, 1, 1, 1), dec_blocks=(1, 1, 1, 1),
                          nafblocks_per_nafg=1)
        p = EncoderDecoderParams.create(cfg, np.random.default_rng(4), dtype=np.float64)

        def f(z):
            d4, _ = encoder_decoder(z, p)
            return mean_all(mul(d4, d4))

        from mhnet.attention import last_selection, trace_selection

        def pattern(z):
            trace_selection(True)
            encoder_decoder(z, p)
            pat = tuple(last_selection())
            trace_selection(False)
            return pat

        err = gradcheck(f, _rand((1, 4, 16, 16)), pattern_fn=pattern,
                        coords=range(0, 4 * 16 * 16, 7))
        assert err < 1e-4


class TestNAFG:
    def test_identity_at_init(self):
        p = NAFGParams.create(8, 3, np.random.default_rng(5))
        x = _rand((2, 8, 6, 6))
        assert np.array_equal(nafg(x, p).data, x.data)

    def test_definition_with_unit_scale(self):
        p = NAFGParams.create(8, 1, np.random.default_rng(6))
        rng = np.random.default_rng(7)
        p.blocks[0].pw2.weight.data[...] = rng.standard_normal(p.blocks[0].pw2.weight.shape)
        p.blocks[0].ffn2.weight.data[...] = rng.standard_normal(p.blocks[0].ffn2.weight.shape)
        p.fuse_scale.data[...] = 1.0
        x = _rand((1, 8, 5, 5))
        want = x.data + naf_block(x, p.blocks[0]).data
        assert np.allclose(nafg(x, p).data, want, atol=1e-6)

    def test_shape_preserved_for_eight_block_group(self):
        p = NAFGParams.create(32, 8, np.random.default_rng(8))
        x = _rand((1, 32, 8, 8))
        assert nafg(x, p).shape == x.shape


class TestAFFM:
    def _features(self, level, c=8, n=1, h=16, w=16):
        r = 2**(level - 1)
        x_i = _rand((n, c, h, w))
        x_ei = _rand((n, c * r, h // r, w // r))
        x_di = _rand((n, c * r, h // r, w // r))
        return x_i, x_ei, x_di

    @pytest.mark.parametrize("level", [1, 2, 3, 4])
    def test_shape_preserved_per_level(self, level):
        p = AFFMParams.create(8, level, np.random.default_rng(level))
        x_i, x_ei, x_di = self._features(level)
        assert affm(x_i, x_ei, x_di, p).shape == x_i.shape

    def test_symmetric_expands_give_thirds(self):
        p = AFFMParams.create(8, 1, np.random.default_rng(9))
        shared_w = np.random.default_rng(10).standard_normal(p.expand_e.weight.shape)
        for e in (p.expand_e, p.expand_d, p.expand_x):
            e.weight.data[...] = shared_w
            e.bias.data[...] = 0.25
        x_i, x_ei, x_di = self._features(1)
        from mhnet.tensor import conv2d_1x1, pixel_shuffle

        xe = conv2d_1x1(pixel_shuffle(x_ei, 1), p.align_e.weight, p.align_e.bias)
        xd = conv2d_1x1(pixel_shuffle(x_di, 1), p.align_d.weight, p.align_d.bias)
        got = affm(x_i, x_ei, x_di, p)
        want = (xe.data + xd.data + x_i.data) / 3.0
        assert np.allclose(got.data, want, atol=1e-5)

    def test_branch_weights_form_simplex(self):
        p = AFFMParams.create(8, 2, np.random.default_rng(11))
        x_i, x_ei, x_di = self._features(2)
        from mhnet.blocks import simple_gate
        from mhnet.tensor import concat_lastdim, conv2d_1x1, gap, pixel_shuffle, softmax_lastdim

        xe = conv2d_1x1(pixel_shuffle(x_ei, 2), p.align_e.weight, p.align_e.bias)
        xd = conv2d_1x1(pixel_shuffle(x_di, 2), p.align_d.weight, p.align_d.bias)
        xs = x_i + xe + xd
        desc = simple_gate(conv2d_1x1(gap(xs), p.squeeze.weight, p.squeeze.bias))
        logits = [conv2d_1x1(desc, e.weight, e.bias)
                  for e in (p.expand_e, p.expand_d, p.expand_x)]
        wts = softmax_lastdim(concat_lastdim(logits)).data
        assert np.allclose(wts.sum(axis=-1), 1.0, atol=1e-6)
        assert (wts >= 0).all()

    def test_saturated_x_branch_returns_x(self):
        p = AFFMParams.create(8, 1, np.random.default_rng(12))
        for e in (p.expand_e, p.expand_d, p.expand_x):
            e.weight.data[...] = 0.0
            e.bias.data[...] = 0.0
        p.expand_x.bias.data[...] = 50.0
        x_i, x_ei, x_di = self._features(1)
        got = affm(x_i, x_ei, x_di, p)
        assert np.abs(got.data - x_i.data).max() < 1e-5

    def test_level_mismatch_rejected(self):
        p = AFFMParams.create(8, 2, np.random.default_rng(13))
        x_i, x_ei, x_di = self._features(1)  # level-1 shapes into a level-2 fuser
        with pytest.raises(ShapeError):
            affm(x_i, x_ei, x_di, p)


class TestMHNet:
    def test_fresh_model_is_identity(self):
        m = MHNet(toy_config(), seed=0)
        img = _rand((1, 3, 32, 32), scale=0.1)
        assert np.array_equal(m(img).data, img.data)

    def test_zeroed_outro_is_identity_after_training_noise(self):
        m = MHNet(toy_config(), seed=0)
        for _, t in m.named_params():
            t.data += 0.01  # knock every parameter off init
        m.zero_output_projection_()
        img = _rand((1, 3, 16, 16))
        assert np.array_equal(m(img).data, img.data)

    def test_shape_contract(self):
        m = MHNet(toy_config(), seed=1)
        img = _rand((2, 3, 64, 48))
        assert m(img).shape == (2, 3, 64, 48)

    def test_non_rgb_rejected(self):
        m = MHNet(toy_config(), seed=1)
        with pytest.raises(ShapeError):
            m(_rand((1, 4, 16, 16)))

    def test_non_multiple_of_16_rejected(self):
        m = MHNet(toy_config(), seed=1)
        with pytest.raises(ShapeError):
            m(_rand((1, 3, 20, 16)))

    def test_construction_determinism(self):
        a = MHNet(toy_config(), seed=3)
        b = MHNet(toy_config(), seed=3)
        for (na, ta), (nb, tb) in zip(a.named_params(), b.named_params()):
            assert na == nb
            assert np.array_equal(ta.data, tb.data)

    def test_forward_determinism(self):
        m = MHNet(toy_config(), seed=4)
        for _, t in m.named_params():
            t.data += 0.01
        img = _rand((1, 3, 16, 16))
        assert np.array_equal(m(img).data, m(img).data)

    def test_width_must_be_multiple_of_8(self):
        with pytest.raises(ShapeError):
            MHNet(ModelConfig(width=4, enc_blocks=(1, 1, 1, 1), nafblocks_per_nafg=1), seed=0)

    def test_param_names_unique(self):
        m = MHNet(toy_config(), seed=0)
        names = [n for n, _ in m.named_params()]
        assert len(names) == len(set(names))

    def test_toy_gradcheck_subsampled(self):
        m = MHNet(toy_config(), seed=5, dtype=np.float64)
        for _, t in m.named_params():
            t.data += 0.02 * np.random.default_rng(6).standard_normal(t.shape)
        target = Tensor(RNG.random((1, 3, 16, 16)), dtype=np.float64)

        from mhnet.attention import last_selection, trace_selection
        from mhnet.metrics import psnr_loss

        def f(z):
            return psnr_loss(m(z), target)

        def pattern(z):
            trace_selection(True)
            m(z)
            pat = tuple(last_selection())
            trace_selection(False)
            return pat

        err = gradcheck(f, _rand((1, 3, 16, 16), scale=0.3), pattern_fn=pattern,
                        coords=range(0, 768, 16))
        assert err < 1e-4
