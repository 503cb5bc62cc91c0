"""Closed-form parameter and multiply-accumulate accounting.

Counting conventions (fixed here, since none are universal): a dense
convolution costs Cout*Cin*k^2 MACs per output position (depth-wise drops
the Cin factor, bias adds are absorbed); elementwise and normalization ops
cost 1 MAC per element; softmax costs 1 per element; pixel shuffle,
reshapes, concats and splits are free data movement. The attention middle
block is charged with its dedicated closed-form cost expression. All
accumulation is integer, so totals equal the per-layer sum exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

from .attention import msa_macs, smam_macs
from .model import LEVELS, MHNet, ModelConfig
from .tensor import ShapeError

# Reference totals for the stock architecture: (params, macs at 256x256) with
# (5%, 10%) tolerances. Out-of-tolerance results are flagged as build errors.
REFERENCE_TOTALS = {32: (16_900_000, 32_000_000_000), 64: (67_000_000, 67_000_000_000)}
PARAM_TOLERANCE = 0.05
MAC_TOLERANCE = 0.10


@dataclass
class ComplexityReport:
    per_layer: list  # (index, name, params, macs)
    total_params: int
    total_macs: int
    attention_formulas: dict  # closed-form costs at the bottleneck resolution

    def csv(self) -> str:
        lines = ["layer,name,params,macs"]
        for idx, name, params, macs in self.per_layer:
            lines.append(f"{idx},{name},{params},{macs}")
        return "\n".join(lines) + "\n"


def _conv_cost(cout: int, cin: int, k: int, s_out: int, bias: bool = True):
    params = cout * cin * k * k + (cout if bias else 0)
    return params, cout * cin * k * k * s_out


def _nafblock_cost(w: int, s: int):
    params = 7 * w * w + 31 * w
    macs = (2 * w * w * s      # pw1
            + 18 * w * s       # depth-wise 3x3 on 2w channels
            + w * s            # gate 1
            + w * s + w * w + w * s  # sca: pool, 1x1 proj on the descriptor, rescale
            + w * w * s        # pw2
            + w * s            # residual add
            + 2 * w * s        # two layer norms
            + 2 * w * w * s    # ffn1
            + w * s            # gate 2
            + w * w * s        # ffn2
            + w * s)           # residual add
    return params, macs


def _smam_cost(c: int, heads: int, h: int, w: int):
    params = 4 * (c * c + c) + 3 * (9 * c + c) + heads
    return params, smam_macs(h, w, c)


def _affm_cost(c: int, level: int, s: int):
    r = 2 ** (level - 1)
    cin = (c * r) // (r * r)
    half = c // 2
    params = 2 * (c * cin + c) + (c * c + c) + 3 * (c * half + c)
    macs = (2 * c * cin * s    # two align convs at full resolution
            + 2 * c * s        # sum of the three branches
            + c * s            # pooled descriptor
            + c * c            # squeeze conv on the descriptor
            + half             # gate
            + 3 * c * half     # three expansions
            + 3 * c            # branch softmax
            + 5 * c * s)       # weighted three-branch fuse
    return params, macs


def layer_costs(cfg: ModelConfig, h: int, w: int) -> list[tuple[int, str, int, int]]:
    """Per-layer (index, name, params, macs) for the whole network at h x w."""
    if h % 16 or w % 16:
        raise ShapeError(f"complexity: input size {h}x{w} must be a multiple of 16")
    c = cfg.width
    s_full = h * w
    rows = []

    def emit(name, params, macs):
        rows.append((len(rows), name, int(params), int(macs)))

    emit("intro", *_conv_cost(c, 3, 3, s_full))
    for lvl in range(LEVELS):
        width = c * 2**lvl
        s = s_full // 4**lvl
        for i in range(cfg.enc_blocks[lvl]):
            emit(f"enc{lvl + 1}.block{i}", *_nafblock_cost(width, s))
        emit(f"down{lvl + 1}", 8 * width * width, 2 * width * width * s)
    cb = cfg.bottleneck_width()
    for i in range(cfg.middle_smam):
        p, m = _smam_cost(cb, cfg.heads, h // 16, w // 16)
        emit(f"middle{i}.smam", p, m)
        emit(f"middle{i}.residual", 0, cb * (s_full // 256))
    for lvl in range(LEVELS):
        width = c * 2**(LEVELS - lvl)     # input width of this upsample
        s = s_full // 4**(LEVELS - lvl)
        emit(f"up{lvl + 1}", 2 * width * width + 2 * width, 2 * width * width * s)
        s_out = s * 4
        emit(f"skip_add{lvl + 1}", 0, (width // 2) * s_out)
        for i in range(cfg.dec_blocks[lvl]):
            emit(f"dec{lvl + 1}.block{i}", *_nafblock_cost(width // 2, s_out))
    emit("x1_fuse", 2 * c * c + c, 2 * c * c * s_full)
    for i in range(cfg.nafg_count):
        for j in range(cfg.nafblocks_per_nafg):
            emit(f"nafg{i}.block{j}", *_nafblock_cost(c, s_full))
        emit(f"nafg{i}.fuse", 1, 2 * c * s_full)  # scale mul + outer residual
        emit(f"affm{i}", *_affm_cost(c, i + 1, s_full))
    emit("outro", *_conv_cost(3, c, 3, s_full))
    emit("global_residual", 0, 3 * s_full)
    return rows


def count_params(model) -> int:
    """Exact count of learnable scalars (weights, biases, norm affines,
    attention scales, fusion scales)."""
    return sum(t.size for _, t in model.named_params())


def count_macs(model: MHNet, h: int, w: int) -> int:
    return sum(m for _, _, _, m in layer_costs(model.config, h, w))


def report_from_config(cfg: ModelConfig, h: int, w: int) -> ComplexityReport:
    rows = layer_costs(cfg, h, w)
    cb = cfg.bottleneck_width()
    formulas = {
        "msa_macs_bottleneck": msa_macs(h // 16, w // 16, cb),
        "smam_macs_bottleneck": smam_macs(h // 16, w // 16, cb),
    }
    return ComplexityReport(
        per_layer=rows,
        total_params=sum(p for _, _, p, _ in rows),
        total_macs=sum(m for _, _, _, m in rows),
        attention_formulas=formulas,
    )


def emit_report(model: MHNet, h: int, w: int) -> ComplexityReport:
    return report_from_config(model.config, h, w)


def check_against_reference(report: ComplexityReport, width: int) -> list[str]:
    """Compare totals against the stock reference; on a miss, return
    diagnostics naming the largest per-layer contributors."""
    if width not in REFERENCE_TOTALS:
        return []
    ref_params, ref_macs = REFERENCE_TOTALS[width]
    problems = []
    checks = (
        ("params", report.total_params, ref_params, PARAM_TOLERANCE, 2),
        ("macs", report.total_macs, ref_macs, MAC_TOLERANCE, 3),
    )
    for label, got, ref, tol, col in checks:
        if abs(got - ref) > tol * ref:
            top = sorted(report.per_layer, key=lambda r: r[col], reverse=True)[:5]
            detail = ", ".join(f"{name}={row[col]:,}" for row in top for name in [row[1]])
            problems.append(
                f"{label} total {got:,} outside {ref:,} +-{tol:.0%}; "
                f"largest layers: {detail}")
    return problems
