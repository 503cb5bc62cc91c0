"""Training loop: Adam with cosine-annealed learning rate, aligned patch
sampling with flip augmentation, trace emission and checkpoint cadence.

The loop is single-threaded and fully deterministic under a fixed seed: two
runs produce bitwise-identical checkpoints. A non-finite loss aborts with
the step index; non-finite gradients skip the step and are logged.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import ConfigError, as_bool
from .metrics import psnr_loss, psnr_unit
from .model import MHNet
from .tensor import GradTape, NumericalError, ShapeError, Tensor

log = logging.getLogger("mhnet.train")


class NonFiniteLossError(NumericalError):
    def __init__(self, step: int, message: str):
        super().__init__(message)
        self.step = step


@dataclass
class TrainConfig:
    """Desk-scale defaults; the full-scale recipe (4e5 iterations, batch 32,
    256px patches) remains expressible through the same fields."""

    iterations: int = 2000
    batch: int = 2
    patch: int = 64
    lr_init: float = 5e-4
    lr_final: float = 1e-7
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    flip_augment: bool = True
    checkpoint_every: int = 500
    clip_grad_norm: Optional[float] = None

    def __post_init__(self):
        if self.lr_final >= self.lr_init:
            raise ConfigError(f"lr_final {self.lr_final} must be below lr_init {self.lr_init}")
        if self.patch % 16:
            raise ConfigError(f"patch {self.patch} must be a multiple of 16")

    @classmethod
    def from_kv(cls, kv: dict) -> "TrainConfig":
        casts = {
            "iterations": int, "batch": int, "patch": int, "lr_init": float,
            "lr_final": float, "beta1": float, "beta2": float, "adam_eps": float,
            "seed": int, "flip_augment": as_bool, "checkpoint_every": int,
            "clip_grad_norm": float,
        }
        kwargs = {}
        for key, cast in casts.items():
            if key in kv:
                kwargs[key] = cast(kv[key])
        return cls(**kwargs)


def cosine_lr(step: int, total: int, lr_init: float, lr_final: float) -> float:
    """lr_final + (lr_init - lr_final) * (1 + cos(pi * step / total)) / 2."""
    if not 0 <= step <= total:
        raise ValueError(f"step {step} outside [0, {total}]")
    return lr_final + (lr_init - lr_final) * (1.0 + math.cos(math.pi * step / total)) / 2.0


class AdamState:
    """First/second moment buffers plus the shared step counter."""

    def __init__(self):
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0


def adam_step(params, grads, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> bool:
    """One bias-corrected Adam update in place.

    Returns False (and leaves params and state untouched) if any gradient
    contains a non-finite value.
    """
    for name, _ in params:
        g = grads[name]
        if not np.isfinite(g).all():
            log.warning("adam_step: non-finite gradient in %s; step skipped", name)
            return False
    state.t += 1
    t = state.t
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, p in params:
        g = grads[name].astype(p.dtype, copy=False)
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            state.m[name] = m
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data -= (lr / c1) * m / (np.sqrt(v / c2) + eps)
    return True


def sample_batch(corpus, patch: int, batch: int, rng, flip_augment: bool):
    """Aligned random crops from paired (degraded, clean) images.

    ``rng`` is a numpy Generator or an integer seed. Flips are decided per
    sample and applied identically to both members. Returns
    (degraded, clean, records); each record is
    (image_index, top, left, flip_h, flip_v).
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.Generator(np.random.Philox(int(rng)))
    deg_out = []
    clean_out = []
    records = []
    for _ in range(batch):
        idx = int(rng.integers(0, len(corpus)))
        deg, clean = corpus[idx]
        _, h, w = deg.shape
        top = int(rng.integers(0, h - patch + 1))
        left = int(rng.integers(0, w - patch + 1))
        dc = deg[:, top:top + patch, left:left + patch]
        cc = clean[:, top:top + patch, left:left + patch]
        fh = fv = False
        if flip_augment:
            fh = bool(rng.integers(0, 2))
            fv = bool(rng.integers(0, 2))
            if fh:
                dc, cc = dc[:, :, ::-1], cc[:, :, ::-1]
            if fv:
                dc, cc = dc[:, ::-1], cc[:, ::-1]
        deg_out.append(dc)
        clean_out.append(cc)
        records.append((idx, top, left, fh, fv))
    return (np.ascontiguousarray(np.stack(deg_out)),
            np.ascontiguousarray(np.stack(clean_out)),
            records)


def trace_line(entry: dict) -> str:
    return (f"step={entry['step']} lr={entry['lr']:.8g} "
            f"loss={entry['loss']:.6f} psnr={entry['psnr']:.4f}")


def _save_rolling(model, ckpt_path, step, kept: list):
    from .checkpoint import save_checkpoint

    path = f"{ckpt_path}.step{step}"
    save_checkpoint(model, path)
    kept.append(path)
    while len(kept) > 2:
        old = kept.pop(0)
        try:
            os.remove(old)
        except OSError:
            pass


def train(model: MHNet, cfg: TrainConfig, corpus, ckpt_path=None):
    """Optimize the model on paired (degraded, clean) float32 (3,H,W) images.

    Returns (model, trace) where trace holds one per-step record. Writes a
    rolling pair of checkpoints every checkpoint_every steps plus a final
    one when ckpt_path is given.
    """
    if not corpus:
        raise ConfigError("training corpus is empty")
    for i, (deg, clean) in enumerate(corpus):
        if deg.shape != clean.shape:
            raise ShapeError(f"corpus item {i}: degraded/clean shapes differ")
        if deg.shape[1] < cfg.patch or deg.shape[2] < cfg.patch:
            raise ShapeError(
                f"corpus item {i}: image {deg.shape[1]}x{deg.shape[2]} smaller "
                f"than patch {cfg.patch}")
    params = model.named_params()
    state = AdamState()
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    trace = []
    kept: list[str] = []
    for step in range(cfg.iterations):
        lr = cosine_lr(step, cfg.iterations, cfg.lr_init, cfg.lr_final)
        deg, clean, _ = sample_batch(corpus, cfg.patch, cfg.batch, rng, cfg.flip_augment)
        deg_t = Tensor(deg)
        clean_t = Tensor(clean)
        with GradTape() as tape:
            pred = model.forward(deg_t)
            loss = psnr_loss(pred, clean_t)
        loss_val = loss.item()
        if not math.isfinite(loss_val):
            raise NonFiniteLossError(
                step, f"non-finite loss at step {step}; last checkpoint retained")
        tape.backward(loss, leaves=[t for _, t in params])
        grads = {name: t.grad for name, t in params}
        if cfg.clip_grad_norm is not None:
            norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
            if norm > cfg.clip_grad_norm:
                scale = cfg.clip_grad_norm / norm
                grads = {k: g * scale for k, g in grads.items()}
        adam_step(params, grads, state, lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
        model.clamp_constraints()
        trace.append({
            "step": step,
            "lr": lr,
            "loss": loss_val,
            "psnr": psnr_unit(pred.data, clean),
        })
        if ckpt_path and cfg.checkpoint_every and (step + 1) % cfg.checkpoint_every == 0:
            _save_rolling(model, ckpt_path, step + 1, kept)
    if ckpt_path:
        from .checkpoint import save_checkpoint

        save_checkpoint(model, ckpt_path)
    return model, trace


def load_corpus(data_dir, patch: Optional[int] = None):
    """Read a paired corpus from <dir>/degraded and <dir>/clean (matching
    PPM filenames); returns a list of (degraded, clean) float32 arrays."""
    from .ppm import read_ppm, to_model_tensor

    deg_dir = os.path.join(data_dir, "degraded")
    clean_dir = os.path.join(data_dir, "clean")
    if not os.path.isdir(deg_dir) or not os.path.isdir(clean_dir):
        raise ConfigError(f"{data_dir} must contain degraded/ and clean/ subdirectories")
    names = sorted(n for n in os.listdir(deg_dir) if n.endswith((".ppm", ".pgm")))
    if not names:
        raise ConfigError(f"no .ppm files found under {deg_dir}")
    corpus = []
    for name in names:
        clean_path = os.path.join(clean_dir, name)
        if not os.path.exists(clean_path):
            raise ConfigError(f"missing clean counterpart for {name}")
        deg = to_model_tensor(read_ppm(os.path.join(deg_dir, name))).data[0]
        clean = to_model_tensor(read_ppm(clean_path)).data[0]
        if patch is not None and (deg.shape[1] < patch or deg.shape[2] < patch):
            raise ShapeError(f"{name}: image smaller than patch {patch}")
        corpus.append((deg, clean))
    return corpus
