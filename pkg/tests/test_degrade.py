"""Degradation generators: determinism, ranges, kernel normalization."""

import numpy as np
import pytest

from mhnet.degrade import (
    BlurSpec,
    DegradeSpec,
    DegradeSpecError,
    NoiseSpec,
    RainSpec,
    apply,
    gaussian_noise,
    motion_blur_kernel,
    rain_streaks,
)

RNG = np.random.default_rng(53)


def _clean(h=32, w=32):
    return RNG.random((1, 3, h, w)).astype(np.float32)


class TestApply:
    def test_zero_sigma_noise_is_identity(self):
        clean = _clean()
        spec = DegradeSpec(kind="noise", seed=1, noise=NoiseSpec(sigma=0.0))
        assert np.array_equal(apply(spec, clean), clean)

    def test_delta_blur_is_identity(self):
        clean = _clean()
        spec = DegradeSpec(kind="motion_blur", seed=2,
                           blur=BlurSpec(kernel_size=5, length=0.0, angle_deg=0.0))
        assert np.allclose(apply(spec, clean), clean, atol=1e-7)

    def test_bit_identical_reruns(self):
        clean = _clean()
        spec = DegradeSpec(kind="compose", seed=99)
        assert np.array_equal(apply(spec, clean), apply(spec, clean))

    def test_output_in_unit_range(self):
        spec = DegradeSpec(kind="compose", seed=5,
                           rain=RainSpec(streak_count=80, intensity=0.9),
                           noise=NoiseSpec(sigma=0.3))
        out = apply(spec, _clean())
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_even_kernel_rejected(self):
        spec = DegradeSpec(kind="motion_blur", blur=BlurSpec(kernel_size=8))
        with pytest.raises(DegradeSpecError):
            apply(spec, _clean())

    def test_unknown_kind_rejected(self):
        with pytest.raises(DegradeSpecError):
            DegradeSpec(kind="sepia")


class TestRain:
    def test_zero_streaks_empty_layer(self):
        layer = rain_streaks(RainSpec(streak_count=0), 16, 16, seed=0)
        assert layer.shape == (1, 1, 16, 16)
        assert not layer.any()

    def test_mean_increases_with_streak_count(self):
        means = [rain_streaks(RainSpec(streak_count=n), 64, 64, seed=7).mean()
                 for n in (5, 20, 80)]
        assert means[0] < means[1] < means[2]

    def test_layer_in_unit_range(self):
        layer = rain_streaks(RainSpec(streak_count=200, intensity=1.0), 32, 32, seed=3)
        assert layer.min() >= 0.0 and layer.max() <= 1.0

    def test_deterministic(self):
        a = rain_streaks(RainSpec(), 24, 24, seed=11)
        b = rain_streaks(RainSpec(), 24, 24, seed=11)
        assert np.array_equal(a, b)


class TestBlurKernel:
    def test_zero_length_walk_is_delta(self):
        k = motion_blur_kernel(BlurSpec(kernel_size=7, trajectory="random_walk", length=0), 0)
        want = np.zeros((7, 7))
        want[3, 3] = 1.0
        assert np.allclose(k, want)

    def test_zero_length_linear_is_delta(self):
        k = motion_blur_kernel(BlurSpec(kernel_size=5, length=0.0, angle_deg=30.0), 0)
        assert np.allclose(k[2, 2], 1.0)

    def test_horizontal_segment_is_uniform_row(self):
        size = 9
        k = motion_blur_kernel(BlurSpec(kernel_size=size, length=size, angle_deg=0.0), 0)
        assert np.allclose(k[size // 2], 1.0 / size, atol=1e-9)
        assert np.allclose(k.sum(), 1.0, atol=1e-6)
        other = np.delete(k, size // 2, axis=0)
        assert not other.any()

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    @pytest.mark.parametrize("traj", ["linear", "random_walk"])
    def test_normalized_and_nonnegative(self, seed, traj):
        k = motion_blur_kernel(BlurSpec(kernel_size=11, trajectory=traj, length=7), seed)
        assert abs(k.sum() - 1.0) < 1e-6
        assert (k >= 0).all()

    def test_constant_image_mean_preserved(self):
        clean = np.full((1, 3, 32, 32), 0.37, dtype=np.float32)
        spec = DegradeSpec(kind="motion_blur", seed=4,
                           blur=BlurSpec(kernel_size=9, trajectory="random_walk", length=12))
        out = apply(spec, clean)
        assert np.allclose(out, 0.37, atol=1e-6)

    def test_oversize_kernel_rejected(self):
        with pytest.raises(DegradeSpecError):
            motion_blur_kernel(BlurSpec(kernel_size=33), 0)


class TestNoise:
    def test_sigma_zero_is_zeros(self):
        assert not gaussian_noise(0.0, 1, (2, 3, 4, 4)).any()

    def test_large_sample_std(self):
        noise = gaussian_noise(0.25, 12, (1_000_000,))
        assert abs(noise.std() / 0.25 - 1.0) < 0.01
        assert abs(noise.mean()) < 0.002

    def test_different_seeds_differ(self):
        a = gaussian_noise(0.1, 1, (4, 4))
        b = gaussian_noise(0.1, 2, (4, 4))
        assert not np.array_equal(a, b)

    def test_negative_sigma_rejected(self):
        with pytest.raises(DegradeSpecError):
            gaussian_noise(-0.1, 0, (2, 2))


class TestSpecParsing:
    def test_from_kv_roundtrip(self):
        kv = {"kind": "compose", "seed": "9", "rain.streak_count": "12",
              "blur.kernel_size": "7", "blur.trajectory": "random_walk",
              "noise.sigma": "0.02"}
        spec = DegradeSpec.from_kv(kv)
        assert spec.kind == "compose" and spec.seed == 9
        assert spec.rain.streak_count == 12
        assert spec.blur.kernel_size == 7 and spec.blur.trajectory == "random_walk"
        assert spec.noise.sigma == pytest.approx(0.02)

    def test_unknown_key_rejected(self):
        with pytest.raises(DegradeSpecError):
            DegradeSpec.from_kv({"rain.width": "3"})
