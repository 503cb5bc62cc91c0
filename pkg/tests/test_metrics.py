"""PSNR, SSIM, luma conversion and the differentiable loss."""

import math

import numpy as np
import pytest

from mhnet.metrics import (
    PSNR_CAP_DB,
    MetricReport,
    psnr,
    psnr_from_mse,
    psnr_loss,
    psnr_unit,
    rgb_to_y,
    ssim,
)
from mhnet.tensor import ShapeError, Tensor, gradcheck

RNG = np.random.default_rng(31)


class TestPsnr:
    def test_identical_hits_cap(self):
        x = RNG.random((1, 3, 8, 8)) * 255
        assert psnr(x, x) == PSNR_CAP_DB

    def test_known_mse(self):
        # n=8, MSE=100 -> 10*log10(65025/100)
        assert abs(psnr_from_mse(100.0, 255.0) - 28.13) < 0.01

    def test_full_scale_error_is_zero_db(self):
        a = np.zeros((4, 4))
        b = np.full((4, 4), 255.0)
        assert abs(psnr(a, b)) < 1e-9

    def test_symmetry(self):
        a, b = RNG.random((2, 3, 6, 6)), RNG.random((2, 3, 6, 6))
        assert psnr_unit(a, b) == psnr_unit(b, a)

    def test_monotone_in_noise_amplitude(self):
        clean = RNG.random((1, 3, 16, 16))
        noise = RNG.standard_normal(clean.shape)
        vals = [psnr_unit(clean + amp * noise, clean) for amp in (0.01, 0.05, 0.2)]
        assert vals[0] > vals[1] > vals[2]

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            psnr(np.zeros((2, 2)), np.zeros((3, 2)))


class TestPsnrLoss:
    def test_floor_at_identical_inputs(self):
        x = Tensor(RNG.random((1, 3, 4, 4)).astype(np.float32))
        loss = psnr_loss(x, Tensor(x.data.copy()))
        assert abs(loss.item() - (-80.0)) < 1e-4

    def test_gradcheck(self):
        target = Tensor(RNG.random((1, 3, 4, 4)), dtype=np.float64)
        x = Tensor(RNG.random((1, 3, 4, 4)).astype(np.float32))
        assert gradcheck(lambda z: psnr_loss(z, target), x) < 1e-4

    def test_monotone_in_mse(self):
        target = Tensor(np.zeros((1, 1, 4, 4), dtype=np.float32))
        losses = [psnr_loss(Tensor(np.full((1, 1, 4, 4), v, dtype=np.float32)), target).item()
                  for v in (0.3, 0.2, 0.1)]
        assert losses[0] > losses[1] > losses[2]


class TestSsim:
    def test_self_similarity_is_one(self):
        x = RNG.random((16, 16))
        assert ssim(x, x) == pytest.approx(1.0)

    def test_constant_full_range_mismatch(self):
        a = np.zeros((16, 16))
        b = np.ones((16, 16))
        assert ssim(a, b, data_range=1.0) < 0.05

    def test_flip_invariance(self):
        a, b = RNG.random((12, 14)), RNG.random((12, 14))
        assert ssim(a, b) == pytest.approx(ssim(a[::-1].copy(), b[::-1].copy()))

    def test_window_size_guard(self):
        with pytest.raises(ShapeError):
            ssim(np.zeros((8, 8)), np.zeros((8, 8)))

    def test_matches_closed_form_on_constants(self):
        # constant patches: ssim = (2ab + c1)/(a^2 + b^2 + c1), variance terms drop out
        a_val, b_val = 0.25, 0.5
        a = np.full((15, 15), a_val)
        b = np.full((15, 15), b_val)
        c1 = 0.01**2
        want = (2 * a_val * b_val + c1) / (a_val**2 + b_val**2 + c1)
        assert ssim(a, b) == pytest.approx(want, abs=1e-9)


class TestLuma:
    def test_black_endpoint(self):
        y = rgb_to_y(np.zeros((1, 3, 2, 2)))
        assert np.allclose(y, 16.0 / 255.0)

    def test_white_endpoint(self):
        y = rgb_to_y(np.ones((1, 3, 2, 2)))
        assert np.allclose(y, 235.0 / 255.0)

    def test_coefficient_ordering(self):
        def pure(c):
            img = np.zeros((1, 3, 1, 1))
            img[0, c] = 1.0
            return rgb_to_y(img).ravel()[0]

        assert pure(1) > pure(0) > pure(2)

    def test_y_psnr_of_identical_hits_cap(self):
        img = RNG.random((1, 3, 8, 8))
        assert psnr_unit(rgb_to_y(img), rgb_to_y(img.copy())) == PSNR_CAP_DB


class TestReportLine:
    def test_identical_pair_line(self):
        rep = MetricReport(psnr_db=99.0, ssim=1.0, channel_mode="rgb")
        assert rep.line().startswith("psnr_db=99.0 ssim=1.0")

    def test_decimals_survive(self):
        rep = MetricReport(psnr_db=28.1308, ssim=0.9132, channel_mode="y")
        assert rep.line() == "psnr_db=28.1308 ssim=0.9132 mode=y"

    def test_loss_formula_matches_metric(self):
        # -psnr_loss equals unit-scale PSNR away from the cap
        a = RNG.random((1, 3, 8, 8)).astype(np.float32)
        b = RNG.random((1, 3, 8, 8)).astype(np.float32)
        loss = psnr_loss(Tensor(a), Tensor(b)).item()
        assert -loss == pytest.approx(psnr_unit(a, b), abs=1e-3)


def test_psnr_from_mse_is_log10_formula():
    for mse in (1.0, 10.0, 123.4):
        want = 10.0 * math.log10(255.0**2 / mse)
        assert psnr_from_mse(mse, 255.0) == pytest.approx(want)
