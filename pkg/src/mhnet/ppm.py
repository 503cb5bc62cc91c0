"""Binary PPM/PGM image IO and reflect padding.

PPM is the bit-exact interchange format: 8-bit P6 (RGB) and P5 (gray),
maxval 255 only. The reader tolerates arbitrary whitespace and '#' comments
in the header; the writer emits a canonical single-whitespace header so a
write/read/write cycle is byte-identical.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .tensor import Tensor

log = logging.getLogger("mhnet.io")


class PPMError(ValueError):
    """Malformed PPM file; message carries the byte offset."""


@dataclass
class Image:
    width: int
    height: int
    channels: int  # 1 or 3
    pixels: np.ndarray  # (H, W, C) uint8, rows top to bottom
    bit_depth: int = 8


class _HeaderScanner:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def _skip_space_and_comments(self):
        while self.pos < len(self.buf):
            c = self.buf[self.pos]
            if c in b" \t\r\n":
                self.pos += 1
            elif c == ord("#"):
                while self.pos < len(self.buf) and self.buf[self.pos] != ord("\n"):
                    self.pos += 1
            else:
                return

    def token(self) -> bytes:
        self._skip_space_and_comments()
        start = self.pos
        while self.pos < len(self.buf) and self.buf[self.pos] not in b" \t\r\n":
            self.pos += 1
        if start == self.pos:
            raise PPMError(f"unexpected end of header at byte {start}")
        return self.buf[start:self.pos]


def read_ppm(path) -> Image:
    with open(path, "rb") as fh:
        buf = fh.read()
    scan = _HeaderScanner(buf)
    magic = scan.token()
    if magic not in (b"P6", b"P5"):
        raise PPMError(f"unsupported magic {magic!r} at byte 0")
    channels = 3 if magic == b"P6" else 1
    try:
        width = int(scan.token())
        height = int(scan.token())
        maxpos = scan.pos
        maxval = int(scan.token())
    except ValueError as e:
        raise PPMError(f"non-numeric header field near byte {scan.pos}") from e
    if width <= 0 or height <= 0:
        raise PPMError(f"non-positive dimensions {width}x{height} near byte {scan.pos}")
    if maxval != 255:
        raise PPMError(f"maxval must be 255, got {maxval} at byte {maxpos}")
    if scan.pos >= len(buf) or buf[scan.pos] not in b" \t\r\n":
        raise PPMError(f"missing whitespace after maxval at byte {scan.pos}")
    start = scan.pos + 1
    need = width * height * channels
    payload = buf[start:start + need]
    if len(payload) != need:
        raise PPMError(
            f"truncated payload at byte {start}: expected {need} bytes, got {len(payload)}")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return Image(width=width, height=height, channels=channels, pixels=pixels.copy())


def write_ppm(img: Image, path):
    if img.channels not in (1, 3):
        raise PPMError(f"cannot write {img.channels}-channel image")
    if img.pixels.shape != (img.height, img.width, img.channels):
        raise PPMError(
            f"pixel buffer shape {img.pixels.shape} does not match "
            f"{img.height}x{img.width}x{img.channels}")
    magic = b"P6" if img.channels == 3 else b"P5"
    header = magic + f" {img.width} {img.height} 255\n".encode()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(img.pixels, dtype=np.uint8).tobytes())


def to_model_tensor(img: Image) -> Tensor:
    """Image -> (1,3,H,W) float32 in [0,1]; gray inputs are replicated to RGB."""
    arr = img.pixels.astype(np.float32) / 255.0
    arr = arr.transpose(2, 0, 1)[None]
    if img.channels == 1:
        log.warning("gray input replicated to 3 channels for the model")
        arr = np.repeat(arr, 3, axis=1)
    return Tensor(arr)


def from_model_tensor(t) -> Image:
    """(1,C,H,W) [0,1] -> 8-bit Image (clip + round)."""
    arr = t.data if isinstance(t, Tensor) else np.asarray(t)
    if arr.ndim != 4 or arr.shape[0] != 1 or arr.shape[1] not in (1, 3):
        raise PPMError(f"expected (1,1|3,H,W) tensor, got shape {arr.shape}")
    u8 = np.clip(np.rint(arr[0] * 255.0), 0, 255).astype(np.uint8)
    h, w = u8.shape[1:]
    return Image(width=w, height=h, channels=u8.shape[0], pixels=u8.transpose(1, 2, 0))


def _reflect_pad_axis(arr: np.ndarray, axis: int, amount: int) -> np.ndarray:
    """np.pad 'reflect', applied in chunks so pads >= dim-1 still work."""
    while amount > 0:
        step = min(amount, arr.shape[axis] - 1)
        if step <= 0:
            raise PPMError(f"cannot reflect-pad a dimension of size {arr.shape[axis]}")
        pads = [(0, 0)] * arr.ndim
        pads[axis] = (0, step)
        arr = np.pad(arr, pads, mode="reflect")
        amount -= step
    return arr


def pad_reflect_to_multiple(t: Tensor, m: int = 16) -> tuple[Tensor, tuple[int, int]]:
    """Reflect-pad bottom/right to multiples of m; returns (padded, (H, W))."""
    n, c, h, w = t.shape
    ph = (-h) % m
    pw = (-w) % m
    arr = t.data
    if ph:
        arr = _reflect_pad_axis(arr, 2, ph)
    if pw:
        arr = _reflect_pad_axis(arr, 3, pw)
    return (t if not (ph or pw) else Tensor(arr)), (h, w)


def crop_to(t: Tensor, dims: tuple[int, int]) -> Tensor:
    h, w = dims
    return Tensor(t.data[:, :, :h, :w].copy())
