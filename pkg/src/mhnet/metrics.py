"""Quality metrics and the differentiable training loss.

PSNR uses mean squared error in the denominator and is capped at 99 dB so
reports stay finite. SSIM follows the universal constants (11x11 Gaussian
window, sigma 1.5, k1=0.01, k2=0.03) over valid window positions. Luma
extraction uses BT.601 studio-swing coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError, Tensor, add_scalar, log10, mean_all, mul, scale, sub

PSNR_CAP_DB = 99.0
_MSE_FLOOR = 1e-10
LOSS_EPS = 1e-8


@dataclass
class MetricReport:
    psnr_db: float
    ssim: float
    channel_mode: str  # "rgb" or "y"
    bit_depth_n: int = 8

    def line(self) -> str:
        return (f"psnr_db={_fmt(self.psnr_db)} ssim={_fmt(self.ssim)} "
                f"mode={self.channel_mode}")


def _fmt(v: float) -> str:
    s = f"{v:.4f}".rstrip("0")
    return s + "0" if s.endswith(".") else s


def _as_array(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def psnr(test, ref, n: int = 8) -> float:
    """Peak signal-to-noise ratio in dB for values on the [0, 2^n - 1] scale."""
    a, b = _as_array(test), _as_array(ref)
    if a.shape != b.shape:
        raise ShapeError(f"psnr: shapes differ, {a.shape} vs {b.shape}")
    mse = float(np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2))
    peak = float(2**n - 1)
    return psnr_from_mse(mse, peak)


def psnr_unit(test, ref) -> float:
    """PSNR for values on the [0, 1] scale (peak 1.0)."""
    a, b = _as_array(test), _as_array(ref)
    if a.shape != b.shape:
        raise ShapeError(f"psnr: shapes differ, {a.shape} vs {b.shape}")
    mse = float(np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2))
    return psnr_from_mse(mse, 1.0)


def psnr_from_mse(mse: float, peak: float) -> float:
    if mse < _MSE_FLOOR:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(peak * peak / mse), PSNR_CAP_DB)


def psnr_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Differentiable negative-PSNR objective on [0,1] data: 10*log10(MSE + eps)."""
    if pred.shape != target.shape:
        raise ShapeError(f"psnr_loss: shapes differ, {pred.shape} vs {target.shape}")
    diff = sub(pred, target)
    mse = mean_all(mul(diff, diff))
    return scale(log10(add_scalar(mse, LOSS_EPS)), 10.0)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    """Separable 2-D correlation keeping only fully-covered positions."""
    k = win.size
    h, w = img.shape
    rows = np.zeros((h, w - k + 1), dtype=np.float64)
    for i, g in enumerate(win):
        rows += g * img[:, i:i + w - k + 1]
    out = np.zeros((h - k + 1, w - k + 1), dtype=np.float64)
    for i, g in enumerate(win):
        out += g * rows[i:i + h - k + 1]
    return out


def ssim(test, ref, data_range: float = 1.0, k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean structural similarity. Accepts (H,W), (C,H,W) or (N,C,H,W);
    multi-channel inputs are averaged per channel."""
    a, b = _as_array(test).astype(np.float64), _as_array(ref).astype(np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"ssim: shapes differ, {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a, b = a[None], b[None]
    a = a.reshape(-1, *a.shape[-2:])
    b = b.reshape(-1, *b.shape[-2:])
    if a.shape[-2] < 11 or a.shape[-1] < 11:
        raise ShapeError(f"ssim: spatial dims must be >= 11, got {a.shape[-2:]}")
    win = _gaussian_window()
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    vals = []
    for x, y in zip(a, b):
        mx = _filter_valid(x, win)
        my = _filter_valid(y, win)
        mxx = _filter_valid(x * x, win)
        myy = _filter_valid(y * y, win)
        mxy = _filter_valid(x * y, win)
        vx = mxx - mx * mx
        vy = myy - my * my
        cov = mxy - mx * my
        num = (2 * mx * my + c1) * (2 * cov + c2)
        den = (mx * mx + my * my + c1) * (vx + vy + c2)
        vals.append(float(np.mean(num / den)))
    return float(np.mean(vals))


def rgb_to_y(img) -> np.ndarray:
    """BT.601 studio-swing luma from RGB in [0,1]: (65.481R + 128.553G + 24.966B + 16)/255."""
    a = _as_array(img)
    if a.ndim != 4 or a.shape[1] != 3:
        raise ShapeError(f"rgb_to_y: expected (N,3,H,W), got {a.shape}")
    r, g, b = a[:, 0], a[:, 1], a[:, 2]
    y = (65.481 * r + 128.553 * g + 24.966 * b + 16.0) / 255.0
    return y[:, None]
