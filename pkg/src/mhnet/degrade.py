"""Synthetic degradations for desk-scale corpora: rain streaks, motion blur
and additive Gaussian noise, composable as degraded = blur(clean) + rain + noise.

Everything is driven by the Philox counter-based generator, so a
(spec, seed) pair reproduces the degraded output bit for bit. Blur uses
reflect padding to avoid dark frame borders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .tensor import Tensor

KINDS = ("rain", "motion_blur", "noise", "compose")
MAX_KERNEL = 31


class DegradeSpecError(ValueError):
    """Invalid degradation parameters."""


@dataclass
class RainSpec:
    streak_count: int = 30
    length_px: float = 12.0
    angle_deg: float = 70.0
    angle_jitter_deg: float = 10.0
    intensity: float = 0.4


@dataclass
class BlurSpec:
    kernel_size: int = 9
    trajectory: str = "linear"  # or "random_walk"
    length: float = 5.0
    angle_deg: Optional[float] = None  # None: drawn from the seed


@dataclass
class NoiseSpec:
    sigma: float = 0.05


@dataclass
class DegradeSpec:
    kind: str = "noise"
    seed: int = 0
    rain: RainSpec = field(default_factory=RainSpec)
    blur: BlurSpec = field(default_factory=BlurSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DegradeSpecError(f"unknown degradation kind {self.kind!r}")

    @classmethod
    def from_kv(cls, kv: dict) -> "DegradeSpec":
        """Build from a flat key=value mapping (dotted sub-keys)."""
        try:
            seed = int(kv.get("seed", 0))
        except ValueError as e:
            raise DegradeSpecError(f"bad value for seed: {kv['seed']!r}") from e
        spec = cls(kind=kv.get("kind", "noise"), seed=seed)
        casts = {
            "rain.streak_count": ("rain", "streak_count", int),
            "rain.length_px": ("rain", "length_px", float),
            "rain.angle_deg": ("rain", "angle_deg", float),
            "rain.angle_jitter_deg": ("rain", "angle_jitter_deg", float),
            "rain.intensity": ("rain", "intensity", float),
            "blur.kernel_size": ("blur", "kernel_size", int),
            "blur.trajectory": ("blur", "trajectory", str),
            "blur.length": ("blur", "length", float),
            "blur.angle_deg": ("blur", "angle_deg", float),
            "noise.sigma": ("noise", "sigma", float),
        }
        for key, value in kv.items():
            if key in ("kind", "seed"):
                continue
            if key not in casts:
                raise DegradeSpecError(f"unknown degradation key {key!r}")
            group, attr, cast = casts[key]
            try:
                setattr(getattr(spec, group), attr, cast(value))
            except ValueError as e:
                raise DegradeSpecError(f"bad value for {key}: {value!r}") from e
        return spec


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def gaussian_noise(sigma: float, seed: int, shape) -> np.ndarray:
    """Seeded zero-mean normal deviates with std sigma, float32."""
    if sigma < 0:
        raise DegradeSpecError(f"noise sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return np.zeros(shape, dtype=np.float32)
    return (_rng(seed).standard_normal(shape) * sigma).astype(np.float32)


def _segment_coverage(h: int, w: int, x0, y0, x1, y1) -> np.ndarray:
    """Anti-aliased coverage of a segment over an HxW grid: 1 on the line,
    falling linearly to 0 one pixel away (point-to-segment distance)."""
    ys, xs = np.mgrid[0:h, 0:w]
    dx, dy = x1 - x0, y1 - y0
    seg_len2 = dx * dx + dy * dy
    if seg_len2 == 0:
        dist = np.hypot(xs - x0, ys - y0)
    else:
        t = ((xs - x0) * dx + (ys - y0) * dy) / seg_len2
        t = np.clip(t, 0.0, 1.0)
        dist = np.hypot(xs - (x0 + t * dx), ys - (y0 + t * dy))
    return np.clip(1.0 - dist, 0.0, 1.0)


def rain_streaks(spec: RainSpec, h: int, w: int, seed: int) -> np.ndarray:
    """Additive rain layer of shape (1,1,H,W), values in [0,1]."""
    if spec.streak_count < 0:
        raise DegradeSpecError("streak_count must be >= 0")
    layer = np.zeros((h, w), dtype=np.float64)
    rng = _rng(seed)
    for _ in range(spec.streak_count):
        cx = rng.uniform(0, w)
        cy = rng.uniform(0, h)
        ang = math.radians(spec.angle_deg + spec.angle_jitter_deg * rng.uniform(-1, 1))
        half = spec.length_px / 2.0
        dx, dy = math.cos(ang) * half, -math.sin(ang) * half
        layer += spec.intensity * _segment_coverage(h, w, cx - dx, cy - dy, cx + dx, cy + dy)
    return np.clip(layer, 0.0, 1.0).astype(np.float32)[None, None]


def motion_blur_kernel(spec: BlurSpec, seed: int) -> np.ndarray:
    """A k x k blur kernel with non-negative entries summing to 1."""
    k = spec.kernel_size
    if k % 2 == 0:
        raise DegradeSpecError(f"blur kernel size must be odd, got {k}")
    if not 1 <= k <= MAX_KERNEL:
        raise DegradeSpecError(f"blur kernel size must be in [1, {MAX_KERNEL}], got {k}")
    if spec.trajectory not in ("linear", "random_walk"):
        raise DegradeSpecError(f"unknown blur trajectory {spec.trajectory!r}")
    rng = _rng(seed)
    c = (k - 1) / 2.0
    if spec.trajectory == "linear":
        angle = rng.uniform(0, 360.0) if spec.angle_deg is None else spec.angle_deg
        ang = math.radians(angle)
        half = max((spec.length - 1.0) / 2.0, 0.0)
        dx, dy = math.cos(ang) * half, -math.sin(ang) * half
        kernel = _segment_coverage(k, k, c - dx, c - dy, c + dx, c + dy)
    else:
        kernel = np.zeros((k, k), dtype=np.float64)
        x = y = c
        kernel[round(c), round(c)] = 1.0
        for _ in range(int(spec.length)):
            heading = rng.uniform(0, 2 * math.pi)
            x = min(max(x + math.cos(heading), 0.0), k - 1.0)
            y = min(max(y + math.sin(heading), 0.0), k - 1.0)
            kernel[round(y), round(x)] += 1.0
    total = kernel.sum()
    if total == 0:
        kernel[round(c), round(c)] = 1.0
        total = 1.0
    return (kernel / total).astype(np.float64)


def _blur(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Reflect-padded 2-D correlation of (N,C,H,W) with a k x k kernel."""
    k = kernel.shape[0]
    p = k // 2
    n, c, h, w = img.shape
    if p > 0:
        padded = np.pad(img, ((0, 0), (0, 0), (p, p), (p, p)), mode="reflect")
    else:
        padded = img
    out = np.zeros_like(img, dtype=np.float64)
    for a in range(k):
        for b in range(k):
            kv = kernel[a, b]
            if kv != 0.0:
                out += kv * padded[:, :, a:a + h, b:b + w]
    return out.astype(img.dtype)


def apply(spec: DegradeSpec, clean) -> np.ndarray:
    """Degrade a clean (N,3,H,W) array in [0,1]; result clamped to [0,1].

    compose applies blur, rain, then noise with decorrelated child seeds
    (seed, seed+1, seed+2).
    """
    arr = clean.data if isinstance(clean, Tensor) else np.asarray(clean, dtype=np.float32)
    if arr.ndim != 4:
        raise DegradeSpecError(f"expected (N,C,H,W) input, got shape {arr.shape}")
    n, c, h, w = arr.shape
    out = arr.astype(np.float32, copy=True)
    if spec.kind == "motion_blur":
        out = _blur(out, motion_blur_kernel(spec.blur, spec.seed))
    elif spec.kind == "rain":
        out = out + rain_streaks(spec.rain, h, w, spec.seed)
    elif spec.kind == "noise":
        out = out + gaussian_noise(spec.noise.sigma, spec.seed, out.shape)
    else:
        out = _blur(out, motion_blur_kernel(spec.blur, spec.seed))
        out = out + rain_streaks(spec.rain, h, w, spec.seed + 1)
        out = out + gaussian_noise(spec.noise.sigma, spec.seed + 2, out.shape)
    return np.clip(out, 0.0, 1.0).astype(np.float32)
