"""Finite-difference verification suite covering every differentiable
operation, runnable from the CLI and the acceptance tests.

Each check builds a pure scalar map with frozen 64-bit parameters and
sweeps >=3 random small inputs. Attention checks skip coordinates whose
selection pattern flips across the probe step (the kink rule).
"""

from __future__ import annotations

import numpy as np

from . import attention as attn
from .attention import NO_SELECTION, SMAMParams, smam
from .blocks import ConvParams, NAFBlockParams, conv_params, naf_block, sca, simple_gate
from .metrics import psnr_loss
from .model import AFFMParams, MHNet, affm, toy_config
from .tensor import (
    Tensor,
    conv2d_1x1,
    downsample,
    dwconv2d_3x3,
    gradcheck,
    layer_norm_channel,
    mean_all,
    mul,
    pixel_shuffle,
    softmax_lastdim,
)

TOLERANCE = 1e-4
STEP = 1e-4


def _sq(y):
    return mean_all(mul(y, y))


def _inputs(rng, shape, count=3, scale=1.0):
    return [Tensor((scale * rng.standard_normal(shape)).astype(np.float32))
            for _ in range(count)]


def _max_err(f, inputs, pattern_fn=None, coords=None):
    return max(gradcheck(f, x, h=STEP, pattern_fn=pattern_fn, coords=coords)
               for x in inputs)


def check_conv2d_1x1(rng):
    w = Tensor(rng.standard_normal((5, 3, 1, 1)), dtype=np.float64)
    b = Tensor(rng.standard_normal(5), dtype=np.float64)
    return _max_err(lambda x: _sq(conv2d_1x1(x, w, b)), _inputs(rng, (1, 3, 4, 4)))


def check_dwconv2d_3x3(rng):
    w = Tensor(rng.standard_normal((3, 1, 3, 3)), dtype=np.float64)
    b = Tensor(rng.standard_normal(3), dtype=np.float64)
    return _max_err(lambda x: _sq(dwconv2d_3x3(x, w, b)), _inputs(rng, (1, 3, 5, 4)))


def check_downsample(rng):
    w = Tensor(rng.standard_normal((6, 3, 2, 2)), dtype=np.float64)
    return _max_err(lambda x: _sq(downsample(x, w)), _inputs(rng, (1, 3, 4, 6)))


def check_pixel_shuffle_composite(rng):
    w = Tensor(rng.standard_normal((12, 3, 1, 1)), dtype=np.float64)
    return _max_err(lambda x: _sq(pixel_shuffle(conv2d_1x1(x, w), 2)),
                    _inputs(rng, (1, 3, 3, 4)))


def check_layer_norm_channel(rng):
    g = Tensor(rng.standard_normal(4), dtype=np.float64)
    b = Tensor(rng.standard_normal(4), dtype=np.float64)
    return _max_err(lambda x: _sq(layer_norm_channel(x, g, b)), _inputs(rng, (1, 4, 3, 3)))


def check_softmax_plain(rng):
    return _max_err(lambda x: _sq(softmax_lastdim(x)), _inputs(rng, (1, 2, 3, 5)))


def check_softmax_masked(rng):
    mask = rng.random((1, 2, 3, 5)) < 0.5
    return _max_err(lambda x: _sq(softmax_lastdim(x, mask)), _inputs(rng, (1, 2, 3, 5)))


def check_simple_gate(rng):
    return _max_err(lambda x: _sq(simple_gate(x)), _inputs(rng, (1, 6, 3, 3)))


def check_sca(rng):
    proj = ConvParams(Tensor(rng.standard_normal((4, 4, 1, 1)), dtype=np.float64),
                      Tensor(rng.standard_normal(4), dtype=np.float64))
    return _max_err(lambda x: _sq(sca(x, proj)), _inputs(rng, (1, 4, 3, 4)))


def check_naf_block(rng):
    p = NAFBlockParams.create(4, rng, dtype=np.float64)
    return _max_err(lambda x: _sq(naf_block(x, p)), _inputs(rng, (1, 4, 6, 6)))


def _selection_pattern(forward):
    def pattern(x):
        attn.trace_selection(True)
        forward(x)
        pat = tuple(attn.last_selection())
        attn.trace_selection(False)
        return pat

    return pattern


def check_smam(rng):
    p = SMAMParams.create(8, 2, rng, dtype=np.float64, threshold=0.0)
    f = lambda x: _sq(smam(x, p))
    return _max_err(f, _inputs(rng, (1, 8, 4, 4)),
                    pattern_fn=_selection_pattern(lambda x: smam(x, p)))


def check_affm(rng):
    p = AFFMParams.create(8, 2, rng, dtype=np.float64)
    e_feat = Tensor(rng.standard_normal((1, 16, 4, 4)), dtype=np.float64)
    d_feat = Tensor(rng.standard_normal((1, 16, 4, 4)), dtype=np.float64)
    return _max_err(lambda x: _sq(affm(x, e_feat, d_feat, p)), _inputs(rng, (1, 8, 8, 8)))


def check_mhnet(rng, coords=None):
    model = MHNet(toy_config(), seed=11, dtype=np.float64)
    for _, t in model.named_params():
        t.data += 0.02 * rng.standard_normal(t.shape)
    target = Tensor(rng.random((1, 3, 16, 16)), dtype=np.float64)
    f = lambda x: psnr_loss(model.forward(x), target)
    return _max_err(f, _inputs(rng, (1, 3, 16, 16), scale=0.3),
                    pattern_fn=_selection_pattern(model.forward), coords=coords)


def check_psnr_loss(rng):
    target = Tensor(rng.random((1, 3, 4, 4)), dtype=np.float64)
    return _max_err(lambda x: psnr_loss(x, target),
                    [Tensor(rng.random((1, 3, 4, 4)).astype(np.float32)) for _ in range(3)])


CHECKS = {
    "conv2d_1x1": check_conv2d_1x1,
    "dwconv2d_3x3": check_dwconv2d_3x3,
    "downsample": check_downsample,
    "pixel_shuffle_composite": check_pixel_shuffle_composite,
    "layer_norm_channel": check_layer_norm_channel,
    "softmax_plain": check_softmax_plain,
    "softmax_masked": check_softmax_masked,
    "simple_gate": check_simple_gate,
    "sca": check_sca,
    "naf_block": check_naf_block,
    "smam": check_smam,
    "affm": check_affm,
    "mhnet": check_mhnet,
    "psnr_loss": check_psnr_loss,
}

MODULE_OPS = {
    "tensor_core": ["conv2d_1x1", "dwconv2d_3x3", "downsample", "pixel_shuffle_composite",
                    "layer_norm_channel", "softmax_plain", "softmax_masked"],
    "nn_blocks": ["simple_gate", "sca", "naf_block"],
    "attention": ["smam"],
    "mhnet": ["affm", "mhnet"],
    "restoration_metrics": ["psnr_loss"],
}


def run_suite(module: str | None = None, seed: int = 0):
    """Run the selected checks; yields (name, max_rel_err) in order."""
    if module is None:
        names = list(CHECKS)
    elif module in MODULE_OPS:
        names = MODULE_OPS[module]
    elif module in CHECKS:
        names = [module]
    else:
        raise KeyError(f"unknown gradcheck module {module!r}; "
                       f"choose from {sorted(MODULE_OPS) + sorted(CHECKS)}")
    for name in names:
        rng = np.random.default_rng(seed)
        yield name, CHECKS[name](rng)
