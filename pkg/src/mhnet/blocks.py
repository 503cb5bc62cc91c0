"""Gated convolutional building blocks: SimpleGate, SCA and the NAFBlock.

The block's only nonlinearities are multiplicative gates; there is no
activation function anywhere. Both internal 1x1 expansions use factor 2 so
the gate halves the width back to C.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .tensor import (
    ShapeError,
    Tensor,
    conv2d_1x1,
    dwconv2d_3x3,
    gap,
    layer_norm_channel,
    mul,
    split_channels_half,
)

LN_EPS = 1e-6


@dataclass
class ConvParams:
    """Weight/bias pair for any of the convolution primitives."""

    weight: Tensor
    bias: Optional[Tensor] = None

    def named_params(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        yield f"{prefix}.weight", self.weight
        if self.bias is not None:
            yield f"{prefix}.bias", self.bias

    def zero_(self):
        self.weight.data[...] = 0.0
        if self.bias is not None:
            self.bias.data[...] = 0.0


@dataclass
class LayerNormParams:
    gamma: Tensor
    beta: Tensor

    def named_params(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        yield f"{prefix}.gamma", self.gamma
        yield f"{prefix}.beta", self.beta


def conv_params(cin, cout, k, rng, dtype=np.float32, bias=True, depthwise=False,
                zero=False) -> ConvParams:
    """Uniform +-1/sqrt(fan_in) weights, zero bias; `zero` blanks the weights too."""
    shape = (cout, 1, k, k) if depthwise else (cout, cin, k, k)
    fan_in = k * k * (1 if depthwise else cin)
    if zero:
        w = np.zeros(shape, dtype=dtype)
    else:
        bound = 1.0 / math.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=shape).astype(dtype)
    b = Tensor(np.zeros(cout, dtype=dtype), requires_grad=True) if bias else None
    return ConvParams(Tensor(w, requires_grad=True), b)


def layer_norm_params(c, dtype=np.float32) -> LayerNormParams:
    return LayerNormParams(
        Tensor(np.ones(c, dtype=dtype), requires_grad=True),
        Tensor(np.zeros(c, dtype=dtype), requires_grad=True),
    )


def simple_gate(x: Tensor) -> Tensor:
    """Split channels in half and multiply the halves elementwise."""
    a, b = split_channels_half(x)
    return mul(a, b)


def sca(x: Tensor, proj: ConvParams) -> Tensor:
    """Simplified channel attention: rescale each channel by a projected
    global-average-pooled descriptor."""
    return mul(x, conv2d_1x1(gap(x), proj.weight, proj.bias))


@dataclass
class NAFBlockParams:
    """All learnables of one NAFBlock of width C.

    pw1/ffn1 expand C->2C, the gates halve back, pw2/ffn2 project C->C and
    sca_proj acts on the pooled C-descriptor.
    """

    width: int
    ln1: LayerNormParams
    pw1: ConvParams
    dw: ConvParams
    sca_proj: ConvParams
    pw2: ConvParams
    ln2: LayerNormParams
    ffn1: ConvParams
    ffn2: ConvParams

    @classmethod
    def create(cls, width, rng, dtype=np.float32, zero_projections=False) -> "NAFBlockParams":
        return cls(
            width=width,
            ln1=layer_norm_params(width, dtype),
            pw1=conv_params(width, 2 * width, 1, rng, dtype),
            dw=conv_params(2 * width, 2 * width, 3, rng, dtype, depthwise=True),
            sca_proj=conv_params(width, width, 1, rng, dtype),
            pw2=conv_params(width, width, 1, rng, dtype, zero=zero_projections),
            ln2=layer_norm_params(width, dtype),
            ffn1=conv_params(width, 2 * width, 1, rng, dtype),
            ffn2=conv_params(width, width, 1, rng, dtype, zero=zero_projections),
        )

    def named_params(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        for field in ("ln1", "pw1", "dw", "sca_proj", "pw2", "ln2", "ffn1", "ffn2"):
            yield from getattr(self, field).named_params(f"{prefix}.{field}")

    def zero_projections_(self):
        """Blank pw2/ffn2 so the block becomes the identity map."""
        self.pw2.zero_()
        self.ffn2.zero_()


def naf_block(x: Tensor, p: NAFBlockParams) -> Tensor:
    """Two-residual gated block; shape preserving, width must match."""
    if x.shape[1] != p.width:
        raise ShapeError(f"naf_block: input width {x.shape[1]} != block width {p.width}")
    h = layer_norm_channel(x, p.ln1.gamma, p.ln1.beta, LN_EPS)
    h = conv2d_1x1(h, p.pw1.weight, p.pw1.bias)
    h = dwconv2d_3x3(h, p.dw.weight, p.dw.bias)
    h = simple_gate(h)
    h = sca(h, p.sca_proj)
    h = conv2d_1x1(h, p.pw2.weight, p.pw2.bias)
    x1 = x + h
    f = layer_norm_channel(x1, p.ln2.gamma, p.ln2.beta, LN_EPS)
    f = conv2d_1x1(f, p.ffn1.weight, p.ffn1.bias)
    f = simple_gate(f)
    f = conv2d_1x1(f, p.ffn2.weight, p.ffn2.bias)
    return x1 + f
