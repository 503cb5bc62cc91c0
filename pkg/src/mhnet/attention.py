"""Selective multi-head attention across channels, plus attention cost formulas.

Scores below the selection threshold are excluded from the softmax and get
probability exactly 0; a row losing every entry keeps only its maximum.
Attention runs over the channel axis: per head, features are viewed as
(C/h, H*W) matrices and the score matrix is (C/h, C/h), so cost grows
linearly with pixel count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .blocks import ConvParams, conv_params
from .tensor import (
    ShapeError,
    Tensor,
    conv2d_1x1,
    div,
    dwconv2d_3x3,
    matmul,
    reshape,
    softmax_lastdim,
    transpose_last2,
)

NO_SELECTION = -math.inf  # threshold sentinel: keep every score
BETA_FLOOR = 1e-4

# Most recent selection masks, appended per smam() call while tracing is on.
# Used by the gradcheck kink-skip rule to detect selection-pattern changes.
_selection_trace: Optional[list] = None


def trace_selection(on: bool = True):
    global _selection_trace
    _selection_trace = [] if on else None


def last_selection():
    return _selection_trace


def selection(scores: np.ndarray, t: float) -> np.ndarray:
    """Keep-mask of the thresholding operator: True where score >= t."""
    return np.asarray(scores) >= t


@dataclass
class SMAMParams:
    """Projections and scaling for one selective attention block of width C."""

    width: int
    heads: int
    q_pw: ConvParams
    q_dw: ConvParams
    k_pw: ConvParams
    k_dw: ConvParams
    v_pw: ConvParams
    v_dw: ConvParams
    out_proj: ConvParams
    beta: Tensor  # (1, heads, 1, 1), learnable, kept > 0
    threshold: float = 0.0

    @classmethod
    def create(cls, width, heads, rng, dtype=np.float32, threshold=0.0) -> "SMAMParams":
        if width % heads != 0:
            raise ShapeError(f"smam: width {width} not divisible by {heads} heads")
        mk = lambda: conv_params(width, width, 1, rng, dtype)
        mkdw = lambda: conv_params(width, width, 3, rng, dtype, depthwise=True)
        beta = Tensor(np.ones((1, heads, 1, 1), dtype=dtype), requires_grad=True)
        return cls(width, heads, mk(), mkdw(), mk(), mkdw(), mk(), mkdw(), mk(),
                   beta, threshold)

    def named_params(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        for field in ("q_pw", "q_dw", "k_pw", "k_dw", "v_pw", "v_dw", "out_proj"):
            yield from getattr(self, field).named_params(f"{prefix}.{field}")
        yield f"{prefix}.beta", self.beta

    def clamp_(self):
        np.maximum(self.beta.data, BETA_FLOOR, out=self.beta.data)


def smam(f: Tensor, p: SMAMParams) -> Tensor:
    """Selective multi-head channel attention; shape preserving."""
    n, c, h, w = f.shape
    if c != p.width:
        raise ShapeError(f"smam: input width {c} != configured width {p.width}")
    if c % p.heads != 0:
        raise ShapeError(f"smam: {c} channels not divisible by {p.heads} heads")
    d = c // p.heads
    hw = h * w

    q = dwconv2d_3x3(conv2d_1x1(f, p.q_pw.weight, p.q_pw.bias), p.q_dw.weight, p.q_dw.bias)
    k = dwconv2d_3x3(conv2d_1x1(f, p.k_pw.weight, p.k_pw.bias), p.k_dw.weight, p.k_dw.bias)
    v = dwconv2d_3x3(conv2d_1x1(f, p.v_pw.weight, p.v_pw.bias), p.v_dw.weight, p.v_dw.bias)

    qh = reshape(q, (n, p.heads, d, hw))
    kh = reshape(k, (n, p.heads, d, hw))
    vh = reshape(v, (n, p.heads, d, hw))

    scores = div(matmul(qh, transpose_last2(kh)), p.beta)  # (N, heads, d, d)
    mask = None if p.threshold == NO_SELECTION else selection(scores.data, p.threshold)
    if _selection_trace is not None:
        _selection_trace.append(None if mask is None else mask.tobytes())
    probs = softmax_lastdim(scores, mask)

    out = reshape(matmul(probs, vh), (n, c, h, w))
    return conv2d_1x1(out, p.out_proj.weight, p.out_proj.bias)


def attention_probs(f: Tensor, p: SMAMParams) -> np.ndarray:
    """The (N, heads, C/h, C/h) attention matrix smam() would use, for inspection."""
    n, c, h, w = f.shape
    d = c // p.heads
    qh = dwconv2d_3x3(conv2d_1x1(f, p.q_pw.weight, p.q_pw.bias), p.q_dw.weight, p.q_dw.bias)
    kh = dwconv2d_3x3(conv2d_1x1(f, p.k_pw.weight, p.k_pw.bias), p.k_dw.weight, p.k_dw.bias)
    qm = qh.data.reshape(n, p.heads, d, h * w)
    km = kh.data.reshape(n, p.heads, d, h * w)
    scores = np.matmul(qm, km.swapaxes(-1, -2)) / p.beta.data
    mask = None if p.threshold == NO_SELECTION else selection(scores, p.threshold)
    return softmax_lastdim(Tensor(scores), mask).data


def msa_macs(h: int, w: int, c: int) -> int:
    """Cost of token-wise global attention: 4*h*w*C^2 + 2*(h*w)^2*C."""
    if h <= 0 or w <= 0 or c <= 0:
        raise ValueError("msa_macs: arguments must be positive")
    hw = h * w
    return 4 * hw * c * c + 2 * hw * hw * c


def smam_macs(h: int, w: int, c: int) -> int:
    """Cost of the selective channel attention block: 5*h*w*C^2 + h*w*C."""
    if h <= 0 or w <= 0 or c <= 0:
        raise ValueError("smam_macs: arguments must be positive")
    hw = h * w
    return 5 * hw * c * c + hw * c
