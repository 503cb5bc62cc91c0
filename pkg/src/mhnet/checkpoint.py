"""Self-describing checkpoint files.

Layout: a text manifest (magic+version line, the model configuration, one
"param <name> <shape>" line per tensor in order, then "end") followed by the
raw parameter payload as little-endian float32 in manifest order. The writer
is canonical, so load -> save reproduces the byte stream exactly.
"""

from __future__ import annotations

import numpy as np

from .model import MHNet, ModelConfig

MAGIC = b"MHNT"
VERSION = 1

_CONFIG_KEYS = ("width", "enc_blocks", "dec_blocks", "middle_smam", "heads",
                "nafg_count", "nafblocks_per_nafg", "smam_threshold")


class CheckpointError(ValueError):
    """Malformed or mismatched checkpoint; message names the failed field."""


def _config_lines(cfg: ModelConfig) -> list[str]:
    return [
        f"width={cfg.width}",
        "enc_blocks=" + ",".join(map(str, cfg.enc_blocks)),
        "dec_blocks=" + ",".join(map(str, cfg.dec_blocks)),
        f"middle_smam={cfg.middle_smam}",
        f"heads={cfg.heads}",
        f"nafg_count={cfg.nafg_count}",
        f"nafblocks_per_nafg={cfg.nafblocks_per_nafg}",
        f"smam_threshold={cfg.smam_threshold!r}",
    ]


def _shape_str(shape) -> str:
    return "-" if len(shape) == 0 else ",".join(map(str, shape))


def _parse_shape(s: str) -> tuple:
    return () if s == "-" else tuple(int(v) for v in s.split(","))


def save_checkpoint(model: MHNet, path):
    lines = [f"{MAGIC.decode()} {VERSION}"]
    lines += _config_lines(model.config)
    named = model.named_params()
    for name, t in named:
        lines.append(f"param {name} {_shape_str(t.shape)}")
    lines.append("end")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode())
        for _, t in named:
            fh.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())


def _parse_manifest(buf: bytes, path):
    nl = buf.find(b"\n")
    if nl < 0 or not buf.startswith(MAGIC + b" "):
        raise CheckpointError(f"{path}: bad magic, expected {MAGIC.decode()!r}")
    try:
        version = int(buf[len(MAGIC) + 1:nl])
    except ValueError:
        raise CheckpointError(f"{path}: unreadable version field")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}, expected {VERSION}")
    kv = {}
    params = []
    pos = nl + 1
    while True:
        nl = buf.find(b"\n", pos)
        if nl < 0:
            raise CheckpointError(f"{path}: manifest not terminated by 'end'")
        line = buf[pos:nl].decode()
        pos = nl + 1
        if line == "end":
            break
        if line.startswith("param "):
            try:
                _, name, shape = line.split(" ")
            except ValueError:
                raise CheckpointError(f"{path}: malformed param line {line!r}")
            params.append((name, _parse_shape(shape)))
        elif "=" in line:
            key, value = line.split("=", 1)
            kv[key] = value
        else:
            raise CheckpointError(f"{path}: unrecognized manifest line {line!r}")
    missing = [k for k in _CONFIG_KEYS if k not in kv]
    if missing:
        raise CheckpointError(f"{path}: manifest missing config fields {missing}")
    cfg = ModelConfig(
        width=int(kv["width"]),
        enc_blocks=tuple(int(v) for v in kv["enc_blocks"].split(",")),
        dec_blocks=tuple(int(v) for v in kv["dec_blocks"].split(",")),
        middle_smam=int(kv["middle_smam"]),
        heads=int(kv["heads"]),
        nafg_count=int(kv["nafg_count"]),
        nafblocks_per_nafg=int(kv["nafblocks_per_nafg"]),
        smam_threshold=float(kv["smam_threshold"]),
    )
    return cfg, params, pos


def load_checkpoint(path, expect_config: ModelConfig | None = None) -> MHNet:
    """Rebuild a model from a checkpoint; validates magic, version, manifest
    consistency and payload length before touching any parameter."""
    with open(path, "rb") as fh:
        buf = fh.read()
    cfg, params, payload_start = _parse_manifest(buf, path)
    if expect_config is not None and cfg != expect_config:
        raise CheckpointError(
            f"{path}: checkpoint config {cfg} does not match requested {expect_config}")
    need = 4 * sum(int(np.prod(shape, dtype=np.int64)) for _, shape in params)
    got = len(buf) - payload_start
    if got != need:
        raise CheckpointError(f"{path}: payload length {got} bytes, expected {need}")
    model = MHNet(cfg, seed=0)
    model_params = dict(model.named_params())
    if [n for n, _ in params] != [n for n, _ in model.named_params()]:
        raise CheckpointError(f"{path}: manifest parameter list does not match the architecture")
    pos = payload_start
    for name, shape in params:
        t = model_params[name]
        if tuple(shape) != t.shape:
            raise CheckpointError(
                f"{path}: parameter {name} has shape {shape}, model expects {t.shape}")
        count = int(np.prod(shape, dtype=np.int64))
        raw = np.frombuffer(buf, dtype="<f4", count=count, offset=pos)
        t.data = raw.reshape(shape).astype(np.float32)
        pos += 4 * count
    return model
