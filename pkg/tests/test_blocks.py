"""SimpleGate, SCA and NAFBlock behavior."""

import numpy as np
import pytest

from mhnet.blocks import ConvParams, NAFBlockParams, conv_params, naf_block, sca, simple_gate
from mhnet.tensor import GradTape, ShapeError, Tensor, concat_channels, gradcheck, mean_all, mul

RNG = np.random.default_rng(3)


def _t(arr, rg=False):
    return Tensor(np.asarray(arr, dtype=np.float32), requires_grad=rg)


def _rand(shape):
    return Tensor(RNG.standard_normal(shape).astype(np.float32))


class TestSimpleGate:
    def test_ones(self):
        x = _t(np.ones((1, 4, 3, 3)))
        assert np.allclose(simple_gate(x).data, 1.0)

    def test_hand_product(self):
        x = _t(np.array([2.0, 3.0]).reshape(1, 2, 1, 1))
        assert np.allclose(simple_gate(x).data, 6.0)

    def test_zero_second_half_absorbs(self):
        x = RNG.standard_normal((1, 6, 2, 2)).astype(np.float32)
        x[:, 3:] = 0.0
        assert not simple_gate(_t(x)).data.any()

    def test_gate_with_ones_is_identity(self):
        x = _rand((2, 3, 4, 4))
        ones = _t(np.ones_like(x.data))
        assert np.array_equal(simple_gate(concat_channels(x, ones)).data, x.data)

    def test_odd_channels_rejected(self):
        with pytest.raises(ShapeError):
            simple_gate(_rand((1, 5, 2, 2)))


class TestSCA:
    def test_identity_proj_squares_constant(self):
        c = np.array([1.5, -2.0, 0.5], dtype=np.float32)
        x = _t(np.broadcast_to(c[None, :, None, None], (1, 3, 4, 4)).copy())
        proj = ConvParams(_t(np.eye(3).reshape(3, 3, 1, 1)), _t(np.zeros(3)))
        y = sca(x, proj)
        for i in range(3):
            assert np.allclose(y.data[0, i], c[i] * c[i], atol=1e-6)

    def test_unit_gate(self):
        x = _rand((2, 3, 4, 4))
        proj = ConvParams(_t(np.zeros((3, 3, 1, 1))), _t(np.ones(3)))
        assert np.array_equal(sca(x, proj).data, x.data)

    def test_zero_gate(self):
        x = _rand((2, 3, 4, 4))
        proj = ConvParams(_t(np.zeros((3, 3, 1, 1))), _t(np.zeros(3)))
        assert not sca(x, proj).data.any()


class TestNAFBlock:
    def test_zero_projections_identity(self):
        p = NAFBlockParams.create(4, RNG, zero_projections=True)
        x = _rand((2, 4, 5, 5))
        assert np.array_equal(naf_block(x, p).data, x.data)

    def test_zeroing_after_creation(self):
        p = NAFBlockParams.create(4, RNG)
        p.zero_projections_()
        x = _rand((1, 4, 6, 6))
        assert np.array_equal(naf_block(x, p).data, x.data)

    @pytest.mark.parametrize("c", [2, 4, 8])
    @pytest.mark.parametrize("hw", [(4, 4), (6, 4), (4, 6)])
    def test_shape_contract(self, c, hw):
        p = NAFBlockParams.create(c, RNG)
        x = _rand((1, c, *hw))
        assert naf_block(x, p).shape == x.shape

    def test_width_mismatch_rejected(self):
        p = NAFBlockParams.create(4, RNG)
        with pytest.raises(ShapeError):
            naf_block(_rand((1, 6, 4, 4)), p)

    def test_gradcheck(self):
        p = NAFBlockParams.create(4, np.random.default_rng(5), dtype=np.float64)
        err = gradcheck(lambda z: mean_all(mul(naf_block(z, p), naf_block(z, p))),
                        _rand((1, 4, 6, 6)))
        assert err < 1e-4

    def test_gradcheck_through_psnr_loss(self):
        from mhnet.metrics import psnr_loss

        p = NAFBlockParams.create(4, np.random.default_rng(7), dtype=np.float64)
        target = Tensor(RNG.random((1, 4, 6, 6)), dtype=np.float64)
        err = gradcheck(lambda z: psnr_loss(naf_block(z, p), target), _rand((1, 4, 6, 6)))
        assert err < 1e-4

    def test_no_activation_nodes(self):
        p = NAFBlockParams.create(4, RNG)
        x = Tensor(RNG.standard_normal((1, 4, 4, 4)).astype(np.float32), requires_grad=True)
        with GradTape() as tape:
            naf_block(x, p)
        ops = set(tape.op_names())
        gates = {"mul"}  # the only elementwise nonlinearity present
        linear = {"conv2d_1x1", "dwconv2d_3x3", "layer_norm_channel", "add",
                  "slice_channels", "gap"}
        assert ops <= gates | linear
        for banned in ("relu", "sigmoid", "gelu", "softmax", "exp", "tanh"):
            assert all(banned not in op for op in ops)

    def test_param_count_formula(self):
        # 7*C^2 + 31*C learnables per block (convs with bias + two LN pairs)
        for c in (4, 8, 32):
            p = NAFBlockParams.create(c, RNG)
            total = sum(t.size for _, t in p.named_params("b"))
            assert total == 7 * c * c + 31 * c

    def test_finite_on_finite_input(self):
        p = NAFBlockParams.create(8, RNG)
        x = _rand((2, 8, 8, 8))
        assert np.isfinite(naf_block(x, p).data).all()
