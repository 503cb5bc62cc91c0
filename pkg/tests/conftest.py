"""Shared helpers for the test suite."""

import numpy as np

from mhnet.degrade import BlurSpec, DegradeSpec, NoiseSpec, RainSpec, apply


def plain_channel_attention(x, p):
    """Independent oracle: channel-wise multi-head attention with NO selection.

    Deliberately self-contained numpy (its own conv and softmax) so it shares
    no code with the smam path it checks.
    """

    def conv1x1(v, cp):
        o, i = cp.weight.shape[:2]
        y = np.einsum("oi,nihw->nohw", cp.weight.data.reshape(o, i), v)
        return y + cp.bias.data[None, :, None, None] if cp.bias is not None else y

    def dwconv(v, cp):
        n, c, h, w = v.shape
        out = np.zeros_like(v)
        vp = np.zeros((n, c, h + 2, w + 2), dtype=v.dtype)
        vp[:, :, 1:-1, 1:-1] = v
        k = cp.weight.data.reshape(c, 3, 3)
        for a in range(3):
            for b in range(3):
                out += k[:, a, b][None, :, None, None] * vp[:, :, a:a + h, b:b + w]
        return out + cp.bias.data[None, :, None, None]

    n, c, h, w = x.shape
    d = c // p.heads
    q = dwconv(conv1x1(x, p.q_pw), p.q_dw).reshape(n, p.heads, d, h * w)
    k = dwconv(conv1x1(x, p.k_pw), p.k_dw).reshape(n, p.heads, d, h * w)
    v = dwconv(conv1x1(x, p.v_pw), p.v_dw).reshape(n, p.heads, d, h * w)
    s = np.matmul(q, k.transpose(0, 1, 3, 2)) / p.beta.data
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    a = e / e.sum(axis=-1, keepdims=True)
    out = np.matmul(a, v).reshape(n, c, h, w)
    return conv1x1(out, p.out_proj)


def smooth_clean_image(seed: int, size: int = 64) -> np.ndarray:
    """A smooth synthetic RGB image (3, size, size) in [0,1]."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = np.stack([
        0.5 + 0.35 * np.sin(2 * np.pi * (xx * f1 + yy * f2 + p))
        for f1, f2, p in rng.uniform(0.5, 2.5, size=(3, 3))
    ]).astype(np.float32)
    return np.clip(img, 0.0, 1.0)


def overfit_pair(seed: int = 5, size: int = 64):
    """The (degraded, clean) pair used by the training smoke tests: light
    rain streaks plus mild sensor noise on a smooth synthetic image."""
    clean = smooth_clean_image(seed, size)
    spec = DegradeSpec(
        kind="compose",
        seed=7,
        blur=BlurSpec(kernel_size=3, length=0),
        rain=RainSpec(streak_count=25, intensity=0.25),
        noise=NoiseSpec(sigma=0.02),
    )
    degraded = apply(spec, clean[None])[0]
    return degraded, clean
