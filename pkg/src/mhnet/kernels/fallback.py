"""Pure-numpy reference implementations of the hot convolution kernels.

These are the import-time fallback when the compiled extension is not
available, and the ground truth the extension is tested against. All
routines treat the last two axes as spatial, use zero padding of 1 and
keep the input dtype (float32 or float64).
"""

import numpy as np


def dwconv3x3_forward(x, w, bias=None):
    """Depth-wise 3x3 cross-correlation. x: (N,C,H,W), w: (C,3,3), bias: (C,) or None."""
    n, c, h, wd = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    y = np.zeros_like(x)
    for a in range(3):
        for b in range(3):
            y += w[:, a, b][None, :, None, None] * xp[:, :, a : a + h, b : b + wd]
    if bias is not None:
        y += bias[None, :, None, None]
    return y


def dwconv3x3_backward_input(grad, w):
    """Gradient w.r.t. x: correlation of grad with the 180-degree rotated kernel."""
    n, c, h, wd = grad.shape
    gp = np.pad(grad, ((0, 0), (0, 0), (1, 1), (1, 1)))
    gx = np.zeros_like(grad)
    for a in range(3):
        for b in range(3):
            gx += w[:, 2 - a, 2 - b][None, :, None, None] * gp[:, :, a : a + h, b : b + wd]
    return gx


def dwconv3x3_backward_weight(grad, x):
    """Gradient w.r.t. w, shape (C,3,3)."""
    n, c, h, wd = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    gw = np.zeros((c, 3, 3), dtype=x.dtype)
    for a in range(3):
        for b in range(3):
            gw[:, a, b] = np.einsum(
                "nchw,nchw->c", grad, xp[:, :, a : a + h, b : b + wd]
            )
    return gw
