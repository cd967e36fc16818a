"""Turn spectrogram grids into 8-bit RGB rasters and network input tensors.

Images are plain ``(height, width, 3)`` uint8 arrays.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .kernels import bilinear_resample

CANVAS_WIDTH = 432
CANVAS_HEIGHT = 288
IMAGE_SIDE = 298
DB_FLOOR = 1e-10
LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class ColorMap:
    table: np.ndarray  # (256, 3) uint8

    def __post_init__(self):
        if self.table.shape != (256, 3) or self.table.dtype != np.uint8:
            raise ValueError("colormap must be a 256x3 uint8 table")

    def luminance(self):
        return self.table @ LUMA

    def to_bytes(self):
        return self.table.tobytes()

    @classmethod
    def from_bytes(cls, raw):
        if len(raw) != 768:
            raise ValueError(f"colormap asset must be 768 bytes, got {len(raw)}")
        return cls(np.frombuffer(raw, dtype=np.uint8).reshape(256, 3).copy())


_DEFAULT_CMAP = None


def default_colormap() -> ColorMap:
    global _DEFAULT_CMAP
    if _DEFAULT_CMAP is None:
        raw = resources.files("vibrodiag").joinpath("data/colormap.rgb").read_bytes()
        _DEFAULT_CMAP = ColorMap.from_bytes(raw)
    return _DEFAULT_CMAP


def to_db_normalized(s, range_db=80.0):
    """Decibel scale relative to the matrix maximum, clamped to ``range_db`` below it.

    A constant matrix has no dynamic range and maps to all zeros.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.size == 0:
        raise ValueError("empty matrix")
    if not range_db > 0:
        raise ValueError("range_db must be positive")
    db = 20.0 * np.log10(np.maximum(s, DB_FLOOR))
    top = db.max()
    if top == db.min():
        return np.zeros_like(db)
    return np.clip((db - (top - range_db)) / range_db, 0.0, 1.0)


def minmax_normalized(m):
    """Affine map of the matrix onto [0, 1]; constant matrices map to zeros."""
    m = np.asarray(m, dtype=np.float64)
    if m.size == 0:
        raise ValueError("empty matrix")
    lo, hi = m.min(), m.max()
    if hi == lo:
        return np.zeros_like(m)
    return (m - lo) / (hi - lo)


def quantize(v):
    """Round [0, 1] floats half-up onto 0..255."""
    return np.clip(np.floor(np.asarray(v) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def render(grid, cmap: ColorMap | None = None, width=CANVAS_WIDTH, height=CANVAS_HEIGHT):
    """Colour a ``(n_freq, n_frames)`` grid of [0, 1] values onto a canvas.

    Frame 0 lands on the left edge, frequency row 0 on the bottom edge.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2 or grid.size == 0:
        raise ValueError("render needs a nonempty 2-D grid")
    cmap = cmap or default_colormap()
    values = bilinear_resample(grid[::-1], height, width)
    return cmap.table[quantize(values)]


def resize(img, height=IMAGE_SIDE, width=IMAGE_SIDE):
    """Corner-aligned bilinear resize, channels handled independently."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError("expected an (H, W, 3) image")
    if img.shape[:2] == (height, width):
        return img.astype(np.uint8, copy=True)
    out = bilinear_resample(img.astype(np.float64), height, width)
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def to_input_tensor(img, side=IMAGE_SIDE):
    """Channel-major float32 tensor of shape (3, side, side) with values byte/255."""
    img = np.asarray(img)
    if img.shape != (side, side, 3):
        raise ValueError(f"expected a {side}x{side} RGB image, got shape {img.shape}")
    return (img.transpose(2, 0, 1).astype(np.float32) / np.float32(255.0))


def from_input_tensor(t):
    return quantize(np.asarray(t, dtype=np.float64)).transpose(1, 2, 0).copy()


# ---------------------------------------------------------------- PPM

def encode_ppm(img) -> bytes:
    img = np.asarray(img, dtype=np.uint8)
    h, w, _ = img.shape
    return b"P6\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(img).tobytes()


def decode_ppm(raw: bytes):
    stream = io.BytesIO(raw)
    tokens = []
    while len(tokens) < 4:
        line = stream.readline()
        if not line:
            raise ValueError("truncated PPM header")
        tokens.extend(line.split(b"#", 1)[0].split())
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic != b"P6" or maxval != 255:
        raise ValueError("only binary P6 images with maxval 255 are supported")
    body = stream.read()
    if len(body) != w * h * 3:
        raise ValueError(f"PPM body has {len(body)} bytes, expected {w * h * 3}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3).copy()


def write_ppm(path, img):
    with open(path, "wb") as fh:
        fh.write(encode_ppm(img))


def read_ppm(path):
    with open(path, "rb") as fh:
        return decode_ppm(fh.read())
