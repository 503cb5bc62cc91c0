"""Model assembly: 4-level encoder-decoder with a selective-attention middle
block, the full-resolution refinement stack of NAFGs, adaptive feature
fusion between the two hierarchies, and the global residual pipeline.

Level arithmetic (dyadic): encoder level l holds 2^(l-1)*C channels at
H/2^(l-1); the bottleneck sits at 16C and H/16. The fusion module lifts a
level-l feature back to full resolution with pixel_shuffle(2^(l-1)), which
is what forces the base width to be a multiple of 8.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .attention import SMAMParams, smam
from .blocks import ConvParams, NAFBlockParams, conv_params, naf_block, simple_gate
from .tensor import (
    ShapeError,
    Tensor,
    concat_channels,
    concat_lastdim,
    conv2d_1x1,
    conv2d_3x3,
    downsample,
    gap,
    mul,
    pixel_shuffle,
    slice_lastdim,
    softmax_lastdim,
)

LEVELS = 4


@dataclass
class ModelConfig:
    """Architecture hyperparameters; fully determine a model."""

    width: int = 32
    enc_blocks: tuple[int, ...] = (1, 1, 1, 28)
    dec_blocks: tuple[int, ...] = (1, 1, 1, 1)
    middle_smam: int = 1
    heads: int = 8
    nafg_count: int = 4
    nafblocks_per_nafg: int = 8
    smam_threshold: float = 0.0

    def __post_init__(self):
        self.enc_blocks = tuple(int(v) for v in self.enc_blocks)
        self.dec_blocks = tuple(int(v) for v in self.dec_blocks)
        if len(self.enc_blocks) != LEVELS or len(self.dec_blocks) != LEVELS:
            raise ShapeError("ModelConfig: enc_blocks and dec_blocks must list 4 levels")
        if self.nafg_count != LEVELS:
            raise ShapeError("ModelConfig: nafg_count must equal the 4 fusion levels")
        if (16 * self.width) % self.heads != 0:
            raise ShapeError("ModelConfig: bottleneck width must divide evenly into heads")

    def bottleneck_width(self) -> int:
        return 16 * self.width

    @classmethod
    def from_kv(cls, kv: dict) -> "ModelConfig":
        casts = {
            "width": int,
            "enc_blocks": lambda v: tuple(int(x) for x in v.split(",")),
            "dec_blocks": lambda v: tuple(int(x) for x in v.split(",")),
            "middle_smam": int,
            "heads": int,
            "nafg_count": int,
            "nafblocks_per_nafg": int,
            "smam_threshold": float,
        }
        kwargs = {}
        for key, cast in casts.items():
            if key in kv:
                kwargs[key] = cast(kv[key])
        return cls(**kwargs)


@dataclass
class EncDecFeatures:
    """Per-level encoder features E1..E4 and decoder features D1..D4
    (D4 at full resolution, width C)."""

    enc: list
    dec: list


@dataclass
class EncoderDecoderParams:
    enc_levels: list  # 4 lists of NAFBlockParams
    downs: list       # 4 ConvParams, no bias
    middles: list     # SMAM blocks applied residually at the bottleneck
    ups: list         # 4 ConvParams (1x1 to 2x channels, then pixel_shuffle(2))
    dec_levels: list

    @classmethod
    def create(cls, cfg: ModelConfig, rng, dtype=np.float32) -> "EncoderDecoderParams":
        c = cfg.width
        enc_levels, downs, ups, dec_levels = [], [], [], []
        for lvl in range(LEVELS):
            w = c * (2**lvl)
            enc_levels.append([NAFBlockParams.create(w, rng, dtype)
                               for _ in range(cfg.enc_blocks[lvl])])
            downs.append(conv_params(w, 2 * w, 2, rng, dtype, bias=False))
        middles = [SMAMParams.create(cfg.bottleneck_width(), cfg.heads, rng, dtype,
                                     threshold=cfg.smam_threshold)
                   for _ in range(cfg.middle_smam)]
        for lvl in range(LEVELS):
            w = c * (2**(LEVELS - lvl))  # 16C, 8C, 4C, 2C
            ups.append(conv_params(w, 2 * w, 1, rng, dtype))
            dec_levels.append([NAFBlockParams.create(w // 2, rng, dtype)
                               for _ in range(cfg.dec_blocks[lvl])])
        return cls(enc_levels, downs, middles, ups, dec_levels)

    def named_params(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        for lvl, blocks in enumerate(self.enc_levels):
            for i, b in enumerate(blocks):
                yield from b.named_params(f"{prefix}.enc{lvl + 1}.block{i}")
            yield from self.downs[lvl].named_params(f"{prefix}.down{lvl + 1}")
        for i, m in enumerate(self.middles):
            yield from m.named_params(f"{prefix}.middle{i}")
        for lvl in range(LEVELS):
            yield from self.ups[lvl].named_params(f"{prefix}.up{lvl + 1}")
            for i, b in enumerate(self.dec_levels[lvl]):
                yield from b.named_params(f"{prefix}.dec{lvl + 1}.block{i}")


def encoder_decoder(x0: Tensor, p: EncoderDecoderParams) -> tuple[Tensor, EncDecFeatures]:
    """U-shaped pass returning the full-resolution decoder output D4 and all
    intermediate features for fusion. Spatial dims must divide by 16."""
    n, c, h, w = x0.shape
    if h % (2**LEVELS) or w % (2**LEVELS):
        raise ShapeError(f"encoder_decoder: spatial dims {h}x{w} not divisible by 16")
    enc = []
    x = x0
    for lvl in range(LEVELS):
        for blk in p.enc_levels[lvl]:
            x = naf_block(x, blk)
        enc.append(x)
        x = downsample(x, p.downs[lvl].weight)
    for m in p.middles:
        x = x + smam(x, m)
    dec = []
    for lvl in range(LEVELS):
        up = p.ups[lvl]
        x = pixel_shuffle(conv2d_1x1(x, up.weight, up.bias), 2)
        x = x + enc[LEVELS - 1 - lvl]
        for blk in p.dec_levels[lvl]:
            x = naf_block(x, blk)
        dec.append(x)
    return dec[-1], EncDecFeatures(enc, dec)


@dataclass
class NAFGParams:
    """A chain of NAFBlocks with an outer residual, scaled by a learnable
    scalar that starts at 0 so the group is the identity at init."""

    blocks: list
    fuse_scale: Tensor

    @classmethod
    def create(cls, width, count, rng, dtype=np.float32) -> "NAFGParams":
        blocks = [NAFBlockParams.create(width, rng, dtype,
                                        zero_projections=(i == count - 1))
                  for i in range(count)]
        return cls(blocks, Tensor(np.zeros((), dtype=dtype), requires_grad=True))

    def named_params(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        for i, b in enumerate(self.blocks):
            yield from b.named_params(f"{prefix}.block{i}")
        yield f"{prefix}.fuse_scale", self.fuse_scale


def nafg(x: Tensor, p: NAFGParams) -> Tensor:
    y = x
    for blk in p.blocks:
        y = naf_block(y, blk)
    return x + mul(y, p.fuse_scale)


@dataclass
class AFFMParams:
    """Fusion of a full-resolution feature with one encoder/decoder level.

    align_e/align_d lift the pixel-shuffled level features to width C; a
    squeezed descriptor drives three parallel expansions whose softmax picks
    per-channel blend weights for the three branches.
    """

    level: int  # 1-based
    align_e: ConvParams
    align_d: ConvParams
    squeeze: ConvParams
    expand_e: ConvParams
    expand_d: ConvParams
    expand_x: ConvParams

    @classmethod
    def create(cls, width, level, rng, dtype=np.float32) -> "AFFMParams":
        r = 2**(level - 1)
        cin = (width * r) // (r * r)
        if (width * r) % (r * r):
            raise ShapeError(
                f"affm: level-{level} feature ({width * r} channels) cannot be "
                f"pixel-shuffled by {r}; base width must be a multiple of 8")
        half = width // 2
        return cls(
            level=level,
            align_e=conv_params(cin, width, 1, rng, dtype),
            align_d=conv_params(cin, width, 1, rng, dtype),
            squeeze=conv_params(width, width, 1, rng, dtype),
            expand_e=conv_params(half, width, 1, rng, dtype),
            expand_d=conv_params(half, width, 1, rng, dtype),
            expand_x=conv_params(half, width, 1, rng, dtype),
        )

    def named_params(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        for f in ("align_e", "align_d", "squeeze", "expand_e", "expand_d", "expand_x"):
            yield from getattr(self, f).named_params(f"{prefix}.{f}")


def affm(x_i: Tensor, x_ei: Tensor, x_di: Tensor, p: AFFMParams) -> Tensor:
    """Blend x_i with the aligned level features using per-channel softmax
    weights; the three weights form a simplex point per channel."""
    n, c, h, w = x_i.shape
    r = 2**(p.level - 1)
    expect = (n, c * r, h // r, w // r)
    if x_ei.shape != expect or x_di.shape != expect:
        raise ShapeError(
            f"affm: level-{p.level} features must have shape {expect}, "
            f"got {x_ei.shape} and {x_di.shape}")
    xe = conv2d_1x1(pixel_shuffle(x_ei, r), p.align_e.weight, p.align_e.bias)
    xd = conv2d_1x1(pixel_shuffle(x_di, r), p.align_d.weight, p.align_d.bias)
    xs = x_i + xe + xd
    desc = simple_gate(conv2d_1x1(gap(xs), p.squeeze.weight, p.squeeze.bias))
    logits = [conv2d_1x1(desc, e.weight, e.bias)
              for e in (p.expand_e, p.expand_d, p.expand_x)]
    weights = softmax_lastdim(concat_lastdim(logits))  # (N, C, 1, 3)
    we = slice_lastdim(weights, 0)
    wd = slice_lastdim(weights, 1)
    wx = slice_lastdim(weights, 2)
    return mul(we, xe) + mul(wd, xd) + mul(wx, x_i)


class MHNet:
    """The full restoration network; parameters are named and ordered
    deterministically for checkpointing.

    The final projection starts at zero, so a freshly built model is the
    identity map (global residual) and training starts from the degraded
    input rather than noise.
    """

    def __init__(self, config: ModelConfig, seed: int = 0, dtype=np.float32):
        self.config = config
        self.dtype = dtype
        rng = np.random.Generator(np.random.Philox(seed))
        c = config.width
        self.intro = conv_params(3, c, 3, rng, dtype)
        self.encdec = EncoderDecoderParams.create(config, rng, dtype)
        self.x1_fuse = conv_params(2 * c, c, 1, rng, dtype)
        self.nafgs = [NAFGParams.create(c, config.nafblocks_per_nafg, rng, dtype)
                      for _ in range(config.nafg_count)]
        self.affms = [AFFMParams.create(c, lvl + 1, rng, dtype)
                      for lvl in range(config.nafg_count)]
        self.outro = conv_params(c, 3, 3, rng, dtype, zero=True)

    def named_params(self) -> list[tuple[str, Tensor]]:
        out = list(self.intro.named_params("intro"))
        out += list(self.encdec.named_params("encdec"))
        out += list(self.x1_fuse.named_params("x1_fuse"))
        for i, g in enumerate(self.nafgs):
            out += list(g.named_params(f"nafg{i}"))
        for i, a in enumerate(self.affms):
            out += list(a.named_params(f"affm{i}"))
        out += list(self.outro.named_params("outro"))
        return out

    def forward(self, img: Tensor) -> Tensor:
        if img.data.ndim != 4 or img.shape[1] != 3:
            raise ShapeError(f"mhnet: expected an RGB (N,3,H,W) input, got {img.shape}")
        x0 = conv2d_3x3(img, self.intro.weight, self.intro.bias)
        d4, feats = encoder_decoder(x0, self.encdec)
        x = conv2d_1x1(concat_channels(x0, d4), self.x1_fuse.weight, self.x1_fuse.bias)
        for lvl in range(self.config.nafg_count):
            x = nafg(x, self.nafgs[lvl])
            x = affm(x, feats.enc[lvl], feats.dec[LEVELS - 1 - lvl], self.affms[lvl])
        residual = conv2d_3x3(x, self.outro.weight, self.outro.bias)
        return residual + img

    def __call__(self, img: Tensor) -> Tensor:
        return self.forward(img)

    def clamp_constraints(self):
        for m in self.encdec.middles:
            m.clamp_()

    def zero_output_projection_(self):
        self.outro.zero_()

    def param_count(self) -> int:
        return sum(t.size for _, t in self.named_params())


def toy_config(width: int = 8, threshold: float = 0.0) -> ModelConfig:
    """Small configuration used by gradcheck and the training smoke tests."""
    return ModelConfig(width=width, enc_blocks=(1, 1, 1, 2), dec_blocks=(1, 1, 1, 1),
                       nafblocks_per_nafg=1, smam_threshold=threshold)
