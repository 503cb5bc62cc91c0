"""Dense NCHW tensor engine with tape-based reverse-mode differentiation.

Tensors wrap numpy arrays (float32 by default, float64 for the gradcheck
oracle). Every operation is a pure function that optionally records a
backward rule on the active ``GradTape``; the tape replays rules in strict
reverse execution order. Broadcasting is deliberately restricted to two
forms: python/0-d scalars, and (N,C,1,1) or (1,C,1,1) channel descriptors
over the spatial axes.
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels

DEFAULT_DTYPE = np.float32
_FLOAT_DTYPES = (np.float32, np.float64)


class ShapeError(ValueError):
    """Raised when an operation's shape contract is violated."""


class NumericalError(ArithmeticError):
    """Raised on non-finite values where the contract requires finiteness."""


class Tensor:
    """A numpy array plus differentiation bookkeeping.

    Features flowing through the network are 4-D (N,C,H,W); losses are 0-d
    scalars, conv biases and layer-norm affines are 1-D. ``grad`` is filled
    by ``GradTape.backward`` for leaves with ``requires_grad``.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def astype(self, dtype) -> "Tensor":
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}, requires_grad={self.requires_grad})"


class _Node:
    __slots__ = ("op", "out", "inputs", "backward_fn")

    def __init__(self, op, out, inputs, backward_fn):
        self.op = op
        self.out = out
        self.inputs = inputs
        self.backward_fn = backward_fn


_ACTIVE_TAPE: Optional["GradTape"] = None


class GradTape:
    """Execution-ordered record of differentiable operations.

    Recording is single-threaded and non-reentrant; two tapes never share
    nodes. Backward traversal visits nodes in exact reverse execution order
    and accumulates gradients where a tensor feeds several consumers.
    """

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "GradTape":
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise RuntimeError("a GradTape is already active; tapes do not nest")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def op_names(self) -> list[str]:
        return [n.op for n in self.nodes]

    def backward(self, loss: Tensor, leaves: Optional[Sequence[Tensor]] = None):
        """Seed d(loss)/d(loss)=1 and propagate to all requires_grad leaves.

        Overwrites ``.grad`` on every leaf encountered on the tape; leaves
        passed explicitly but never touched by any recorded op get zeros.
        """
        if loss.data.size != 1:
            raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        produced = set()
        leaf_tensors: dict[int, Tensor] = {}
        for node in self.nodes:
            produced.add(id(node.out))
        for node in reversed(self.nodes):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            input_grads = node.backward_fn(g)
            for t, gi in zip(node.inputs, input_grads):
                if t is None or gi is None:
                    continue
                prev = grads.get(id(t))
                grads[id(t)] = gi if prev is None else prev + gi
                if t.requires_grad and id(t) not in produced:
                    leaf_tensors[id(t)] = t
        for tid, t in leaf_tensors.items():
            t.grad = grads.get(tid, np.zeros_like(t.data))
        if leaves is not None:
            for t in leaves:
                if t.requires_grad and id(t) not in leaf_tensors:
                    t.grad = grads.get(id(t), np.zeros_like(t.data))


def backward(tape: GradTape, loss: Tensor, leaves: Optional[Sequence[Tensor]] = None):
    """Free-function form of ``GradTape.backward``."""
    tape.backward(loss, leaves)


def _requires(*tensors) -> bool:
    return any(t is not None and t.requires_grad for t in tensors)


def _record(op: str, out: Tensor, inputs, backward_fn):
    if _ACTIVE_TAPE is not None and out.requires_grad:
        _ACTIVE_TAPE.nodes.append(_Node(op, out, tuple(inputs), backward_fn))


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum-reduce a broadcast gradient back to the operand's shape."""
    if g.shape == tuple(shape):
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    axes = tuple(i for i, (gd, sd) in enumerate(zip(g.shape, shape)) if sd == 1 and gd > 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _check_elementwise(op: str, a: Tensor, b: Tensor):
    sa, sb = a.shape, b.shape
    if sa == sb:
        return
    if a.size == 1 or b.size == 1:
        return
    if len(sa) == 4 and len(sb) == 4:
        if sb[2:] == (1, 1) and sb[1] == sa[1] and sb[0] in (1, sa[0]):
            return
        if sa[2:] == (1, 1) and sa[1] == sb[1] and sa[0] in (1, sb[0]):
            return
    raise ShapeError(
        f"{op}: shapes {sa} and {sb} are neither equal nor a permitted "
        "scalar / (N,C,1,1)-descriptor broadcast"
    )


def _require_4d(op: str, x: Tensor):
    if x.data.ndim != 4:
        raise ShapeError(f"{op}: expected a 4-D N,C,H,W tensor, got shape {x.shape}")


# ---------------------------------------------------------------------------
# elementwise suite

def add(x: Tensor, y: Tensor) -> Tensor:
    _check_elementwise("add", x, y)
    out = Tensor(x.data + y.data, requires_grad=_requires(x, y))

    def bwd(g):
        return (_unbroadcast(g, x.shape) if x.requires_grad else None,
                _unbroadcast(g, y.shape) if y.requires_grad else None)

    _record("add", out, (x, y), bwd)
    return out


def sub(x: Tensor, y: Tensor) -> Tensor:
    _check_elementwise("sub", x, y)
    out = Tensor(x.data - y.data, requires_grad=_requires(x, y))

    def bwd(g):
        return (_unbroadcast(g, x.shape) if x.requires_grad else None,
                _unbroadcast(-g, y.shape) if y.requires_grad else None)

    _record("sub", out, (x, y), bwd)
    return out


def mul(x: Tensor, y: Tensor) -> Tensor:
    _check_elementwise("mul", x, y)
    out = Tensor(x.data * y.data, requires_grad=_requires(x, y))
    xd, yd = x.data, y.data

    def bwd(g):
        return (_unbroadcast(g * yd, x.shape) if x.requires_grad else None,
                _unbroadcast(g * xd, y.shape) if y.requires_grad else None)

    _record("mul", out, (x, y), bwd)
    return out


def div(x: Tensor, y: Tensor) -> Tensor:
    _check_elementwise("div", x, y)
    out = Tensor(x.data / y.data, requires_grad=_requires(x, y))
    xd, yd = x.data, y.data

    def bwd(g):
        return (_unbroadcast(g / yd, x.shape) if x.requires_grad else None,
                _unbroadcast(-g * xd / (yd * yd), y.shape) if y.requires_grad else None)

    _record("div", out, (x, y), bwd)
    return out


def scale(x: Tensor, c: float) -> Tensor:
    out = Tensor(x.data * c, requires_grad=x.requires_grad)
    _record("scale", out, (x,), lambda g: (g * c,))
    return out


def add_scalar(x: Tensor, c: float) -> Tensor:
    out = Tensor(x.data + c, requires_grad=x.requires_grad)
    _record("add_scalar", out, (x,), lambda g: (g,))
    return out


def log10(x: Tensor) -> Tensor:
    out = Tensor(np.log10(x.data), requires_grad=x.requires_grad)
    xd = x.data

    def bwd(g):
        return (g / (xd * math.log(10.0)),)

    _record("log10", out, (x,), bwd)
    return out


def concat_channels(x: Tensor, y: Tensor) -> Tensor:
    _require_4d("concat_channels", x)
    _require_4d("concat_channels", y)
    if x.shape[0] != y.shape[0] or x.shape[2:] != y.shape[2:]:
        raise ShapeError(f"concat_channels: incompatible shapes {x.shape} and {y.shape}")
    out = Tensor(np.concatenate([x.data, y.data], axis=1), requires_grad=_requires(x, y))
    cx = x.shape[1]

    def bwd(g):
        return (g[:, :cx] if x.requires_grad else None,
                g[:, cx:] if y.requires_grad else None)

    _record("concat_channels", out, (x, y), bwd)
    return out


def slice_channels(x: Tensor, lo: int, hi: int) -> Tensor:
    _require_4d("slice_channels", x)
    if not (0 <= lo < hi <= x.shape[1]):
        raise ShapeError(f"slice_channels: [{lo},{hi}) out of range for {x.shape[1]} channels")
    out = Tensor(x.data[:, lo:hi].copy(), requires_grad=x.requires_grad)

    def bwd(g):
        gx = np.zeros_like(x.data)
        gx[:, lo:hi] = g
        return (gx,)

    _record("slice_channels", out, (x,), bwd)
    return out


def split_channels_half(x: Tensor) -> tuple[Tensor, Tensor]:
    _require_4d("split_channels_half", x)
    c = x.shape[1]
    if c % 2 != 0:
        raise ShapeError(f"split_channels_half: channel count {c} is odd")
    return slice_channels(x, 0, c // 2), slice_channels(x, c // 2, c)


def concat_lastdim(tensors: Sequence[Tensor]) -> Tensor:
    out = Tensor(np.concatenate([t.data for t in tensors], axis=-1),
                 requires_grad=_requires(*tensors))
    widths = [t.shape[-1] for t in tensors]

    def bwd(g):
        grads, pos = [], 0
        for t, w in zip(tensors, widths):
            grads.append(g[..., pos:pos + w] if t.requires_grad else None)
            pos += w
        return tuple(grads)

    _record("concat_lastdim", out, tuple(tensors), bwd)
    return out


def slice_lastdim(x: Tensor, i: int) -> Tensor:
    out = Tensor(x.data[..., i:i + 1].copy(), requires_grad=x.requires_grad)

    def bwd(g):
        gx = np.zeros_like(x.data)
        gx[..., i:i + 1] = g
        return (gx,)

    _record("slice_lastdim", out, (x,), bwd)
    return out


# ---------------------------------------------------------------------------
# convolutions and resampling

def conv2d_1x1(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Pointwise convolution. weight: (Cout,Cin,1,1), bias: (Cout,) or None."""
    _require_4d("conv2d_1x1", x)
    if weight.data.ndim != 4 or weight.shape[2:] != (1, 1):
        raise ShapeError(f"conv2d_1x1: weight must be (Cout,Cin,1,1), got {weight.shape}")
    n, c, h, w = x.shape
    co, ci = weight.shape[:2]
    if ci != c:
        raise ShapeError(f"conv2d_1x1: weight expects {ci} input channels, x has {c}")
    if bias is not None and bias.shape != (co,):
        raise ShapeError(f"conv2d_1x1: bias shape {bias.shape} != ({co},)")
    w2 = weight.data.reshape(co, ci)
    x3 = x.data.reshape(n, c, h * w)
    y3 = np.matmul(w2, x3)
    y = y3.reshape(n, co, h, w)
    if bias is not None:
        y = y + bias.data[None, :, None, None]
    out = Tensor(y, requires_grad=_requires(x, weight, bias))

    def bwd(g):
        g3 = g.reshape(n, co, h * w)
        gx = np.matmul(w2.T, g3).reshape(x.shape) if x.requires_grad else None
        gw = None
        if weight.requires_grad:
            gw = np.matmul(g3, x3.transpose(0, 2, 1)).sum(axis=0).reshape(weight.shape)
        gb = g.sum(axis=(0, 2, 3)) if bias is not None and bias.requires_grad else None
        return (gx, gw, gb)

    _record("conv2d_1x1", out, (x, weight, bias), bwd)
    return out


def conv2d_3x3(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Dense 3x3 cross-correlation with zero padding 1; shape-preserving."""
    _require_4d("conv2d_3x3", x)
    if weight.data.ndim != 4 or weight.shape[2:] != (3, 3):
        raise ShapeError(f"conv2d_3x3: weight must be (Cout,Cin,3,3), got {weight.shape}")
    n, c, h, w = x.shape
    co, ci = weight.shape[:2]
    if ci != c:
        raise ShapeError(f"conv2d_3x3: weight expects {ci} input channels, x has {c}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (1, 1), (1, 1)))
    y3 = np.zeros((n, co, h * w), dtype=x.dtype)
    for a in range(3):
        for b in range(3):
            y3 += np.matmul(weight.data[:, :, a, b],
                            xp[:, :, a:a + h, b:b + w].reshape(n, c, h * w))
    y = y3.reshape(n, co, h, w)
    if bias is not None:
        y = y + bias.data[None, :, None, None]
    out = Tensor(y, requires_grad=_requires(x, weight, bias))

    def bwd(g):
        gx = None
        if x.requires_grad:
            gp = np.pad(g, ((0, 0), (0, 0), (1, 1), (1, 1)))
            gx3 = np.zeros((n, c, h * w), dtype=g.dtype)
            for a in range(3):
                for b in range(3):
                    gx3 += np.matmul(weight.data[:, :, 2 - a, 2 - b].T,
                                     gp[:, :, a:a + h, b:b + w].reshape(n, co, h * w))
            gx = gx3.reshape(x.shape)
        gw = None
        if weight.requires_grad:
            gw = np.zeros_like(weight.data)
            g3 = g.reshape(n, co, h * w)
            for a in range(3):
                for b in range(3):
                    patch = xp[:, :, a:a + h, b:b + w].reshape(n, c, h * w)
                    gw[:, :, a, b] = np.matmul(g3, patch.transpose(0, 2, 1)).sum(axis=0)
        gb = g.sum(axis=(0, 2, 3)) if bias is not None and bias.requires_grad else None
        return (gx, gw, gb)

    _record("conv2d_3x3", out, (x, weight, bias), bwd)
    return out


def dwconv2d_3x3(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Depth-wise 3x3 cross-correlation (one kernel per channel), zero padding 1.

    Dispatches to the compiled kernel when built; the numpy fallback is
    numerically identical.
    """
    _require_4d("dwconv2d_3x3", x)
    n, c, h, w = x.shape
    if weight.shape != (c, 1, 3, 3):
        raise ShapeError(f"dwconv2d_3x3: weight must be ({c},1,3,3), got {weight.shape}")
    if bias is not None and bias.shape != (c,):
        raise ShapeError(f"dwconv2d_3x3: bias shape {bias.shape} != ({c},)")
    dtypes = [x.dtype, weight.dtype] + ([bias.dtype] if bias is not None else [])
    ct = np.result_type(*dtypes)
    w3 = np.ascontiguousarray(weight.data.reshape(c, 3, 3), dtype=ct)
    xd = np.ascontiguousarray(x.data, dtype=ct)
    bd = None if bias is None else np.ascontiguousarray(bias.data, dtype=ct)
    y = kernels.dwconv3x3_forward(xd, w3, bd)
    out = Tensor(y, requires_grad=_requires(x, weight, bias))

    def bwd(g):
        gc = np.ascontiguousarray(g, dtype=ct)
        gx = kernels.dwconv3x3_backward_input(gc, w3) if x.requires_grad else None
        gw = None
        if weight.requires_grad:
            gw = kernels.dwconv3x3_backward_weight(gc, xd).reshape(weight.shape)
        gb = g.sum(axis=(0, 2, 3)) if bias is not None and bias.requires_grad else None
        return (gx, gw, gb)

    _record("dwconv2d_3x3", out, (x, weight, bias), bwd)
    return out


def downsample(x: Tensor, weight: Tensor) -> Tensor:
    """Stride-2 non-overlapping 2x2 convolution doubling channels (no bias)."""
    _require_4d("downsample", x)
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"downsample: spatial dims must be even, got {h}x{w}")
    if weight.shape != (2 * c, c, 2, 2):
        raise ShapeError(f"downsample: weight must be ({2 * c},{c},2,2), got {weight.shape}")
    ho, wo = h // 2, w // 2
    patches = (x.data.reshape(n, c, ho, 2, wo, 2)
               .transpose(0, 2, 4, 1, 3, 5)
               .reshape(n, ho, wo, c * 4))
    wf = weight.data.reshape(2 * c, c * 4)
    y = np.matmul(patches, wf.T).transpose(0, 3, 1, 2)
    out = Tensor(y, requires_grad=_requires(x, weight))

    def bwd(g):
        gt = g.transpose(0, 2, 3, 1)
        gx = None
        if x.requires_grad:
            gx = (np.matmul(gt, wf)
                  .reshape(n, ho, wo, c, 2, 2)
                  .transpose(0, 3, 1, 4, 2, 5)
                  .reshape(x.shape))
        gw = None
        if weight.requires_grad:
            gw = np.tensordot(gt, patches, axes=([0, 1, 2], [0, 1, 2])).reshape(weight.shape)
        return (gx, gw)

    _record("downsample", out, (x, weight), bwd)
    return out


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """Rearrange r*r channel groups into an r-times upsampled grid.

    Channel-major sub-pixel layout: y[n,c,r*h+a,r*w+b] = x[n, c*r*r + a*r + b, h, w].
    """
    _require_4d("pixel_shuffle", x)
    if r < 1:
        raise ShapeError(f"pixel_shuffle: r must be positive, got {r}")
    n, c, h, w = x.shape
    if c % (r * r) != 0:
        raise ShapeError(f"pixel_shuffle: {c} channels not divisible by r*r={r * r}")
    co = c // (r * r)
    y = (x.data.reshape(n, co, r, r, h, w)
         .transpose(0, 1, 4, 2, 5, 3)
         .reshape(n, co, h * r, w * r))
    out = Tensor(y, requires_grad=x.requires_grad)

    def bwd(g):
        gx = (g.reshape(n, co, h, r, w, r)
              .transpose(0, 1, 3, 5, 2, 4)
              .reshape(x.shape))
        return (gx,)

    _record("pixel_shuffle", out, (x,), bwd)
    return out


def gap(x: Tensor) -> Tensor:
    """Global average pooling to a (N,C,1,1) channel descriptor."""
    _require_4d("gap", x)
    n, c, h, w = x.shape
    out = Tensor(x.data.mean(axis=(2, 3), keepdims=True), requires_grad=x.requires_grad)

    def bwd(g):
        return (np.broadcast_to(g, x.shape) / (h * w),)

    _record("gap", out, (x,), bwd)
    return out


def layer_norm_channel(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-6) -> Tensor:
    """Standardize the channel vector at each (n,h,w), then scale and shift."""
    _require_4d("layer_norm_channel", x)
    if eps <= 0:
        raise ShapeError(f"layer_norm_channel: eps must be positive, got {eps}")
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"layer_norm_channel: gamma/beta must be ({c},)")
    mu = x.data.mean(axis=1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    gmap = gamma.data[None, :, None, None]
    y = gmap * xhat + beta.data[None, :, None, None]
    out = Tensor(y, requires_grad=_requires(x, gamma, beta))

    def bwd(g):
        gx = None
        if x.requires_grad:
            dxhat = g * gmap
            gx = inv * (dxhat
                        - dxhat.mean(axis=1, keepdims=True)
                        - xhat * (dxhat * xhat).mean(axis=1, keepdims=True))
        gg = (g * xhat).sum(axis=(0, 2, 3)) if gamma.requires_grad else None
        gb = g.sum(axis=(0, 2, 3)) if beta.requires_grad else None
        return (gx, gg, gb)

    _record("layer_norm_channel", out, (x, gamma, beta), bwd)
    return out


def softmax_lastdim(x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """Max-subtracted softmax along the last axis, with optional keep-mask.

    Masked-out entries get probability exactly 0. A row whose mask drops
    everything falls back to keeping only its maximum-score entry (first
    occurrence), which then carries probability 1 and zero gradient.
    """
    xd = x.data
    if mask is None:
        z = xd
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != xd.shape:
            raise ShapeError(f"softmax_lastdim: mask shape {mask.shape} != {xd.shape}")
        eff = mask
        dead = ~mask.any(axis=-1)
        if dead.any():
            eff = mask.copy()
            onehot = np.zeros_like(mask)
            idx = np.argmax(xd, axis=-1)
            np.put_along_axis(onehot, idx[..., None], True, axis=-1)
            eff[dead] = onehot[dead]
        z = np.where(eff, xd, -np.inf)
    m = z.max(axis=-1, keepdims=True)
    e = np.exp(z - m)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(y, requires_grad=x.requires_grad)

    def bwd(g):
        inner = (g * y).sum(axis=-1, keepdims=True)
        return (y * (g - inner),)

    _record("softmax_lastdim", out, (x,), bwd)
    return out


# ---------------------------------------------------------------------------
# linear algebra / views

def matmul(x: Tensor, y: Tensor) -> Tensor:
    """Batched matrix product over the last two axes; leading axes must match."""
    if x.shape[:-2] != y.shape[:-2] or x.shape[-1] != y.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {x.shape} @ {y.shape}")
    out = Tensor(np.matmul(x.data, y.data), requires_grad=_requires(x, y))
    xd, yd = x.data, y.data

    def bwd(g):
        gx = np.matmul(g, yd.swapaxes(-1, -2)) if x.requires_grad else None
        gy = np.matmul(xd.swapaxes(-1, -2), g) if y.requires_grad else None
        return (gx, gy)

    _record("matmul", out, (x, y), bwd)
    return out


def transpose_last2(x: Tensor) -> Tensor:
    out = Tensor(x.data.swapaxes(-1, -2), requires_grad=x.requires_grad)
    _record("transpose_last2", out, (x,), lambda g: (g.swapaxes(-1, -2),))
    return out


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    out = Tensor(x.data.reshape(shape), requires_grad=x.requires_grad)
    _record("reshape", out, (x,), lambda g: (g.reshape(x.shape),))
    return out


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(np.asarray(x.data.sum()), requires_grad=x.requires_grad)
    _record("sum_all", out, (x,), lambda g: (np.broadcast_to(g, x.shape).copy(),))
    return out


def mean_all(x: Tensor) -> Tensor:
    size = x.size
    out = Tensor(np.asarray(x.data.mean()), requires_grad=x.requires_grad)
    _record("mean_all", out, (x,), lambda g: (np.broadcast_to(g, x.shape) / size,))
    return out


# ---------------------------------------------------------------------------
# finite-difference oracle

def gradcheck(
    f: Callable[[Tensor], Tensor],
    x: Tensor,
    h: float = 1e-4,
    pattern_fn: Optional[Callable[[Tensor], object]] = None,
    coords: Optional[Sequence[int]] = None,
) -> float:
    """Compare tape gradients of a scalar map against central differences.

    The oracle path re-runs ``f`` in 64-bit. Returns the max over checked
    coordinates of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    ``pattern_fn``, when given, is evaluated at x+h*e and x-h*e; coordinates
    where the pattern changes (a selection kink straddles the step) are
    skipped. ``coords`` restricts the sweep to a coordinate subset.
    """
    x64 = Tensor(np.array(x.data, dtype=np.float64), requires_grad=True)
    with GradTape() as tape:
        y = f(x64)
    if y.data.size != 1:
        raise ShapeError(f"gradcheck requires a scalar-valued map, got shape {y.shape}")
    tape.backward(y, leaves=[x64])
    analytic = x64.grad.ravel()
    flat = x64.data.ravel()
    indices = range(flat.size) if coords is None else coords
    worst = 0.0
    for i in indices:
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x64).data)
        pat_p = pattern_fn(x64) if pattern_fn is not None else None
        flat[i] = orig - h
        fm = float(f(x64).data)
        pat_m = pattern_fn(x64) if pattern_fn is not None else None
        flat[i] = orig
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NumericalError(f"gradcheck: non-finite evaluation at coordinate {i}")
        if pattern_fn is not None and pat_p != pat_m:
            continue
        numeric = (fp - fm) / (2.0 * h)
        a = analytic[i]
        denom = max(abs(a), abs(numeric), 1e-8)
        err = abs(a - numeric) / denom
        if err > worst:
            worst = err
    return worst
