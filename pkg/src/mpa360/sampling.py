"""Reference-frame sampling and block prediction.

Fractional positions are interpolated bilinearly.  Each of the four taps
is addressed independently: the column index wraps modulo the frame
width (ERP wrap-around padding) and the row index is clamped to the
raster (replicate padding at the poles).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch
from .motion import BlockSpec, MotionField


@dataclass(eq=False)
class Frame:
    """Single-component raster, ``samples[v, u]``."""

    samples: np.ndarray
    bit_depth: int = 8

    def __post_init__(self) -> None:
        if self.bit_depth not in (8, 10):
            raise ValueError(f"unsupported bit depth {self.bit_depth}")
        s = np.asarray(self.samples)
        if s.ndim != 2:
            raise ValueError("frame samples must be 2-D (rows, columns)")
        if not np.issubdtype(s.dtype, np.integer):
            raise TypeError("frame samples must be integers; use Frame.from_float")
        if s.size and (s.min() < 0 or s.max() > self.max_value):
            raise ValueError(f"samples outside [0, {self.max_value}]")
        self.samples = s.astype(np.uint16 if self.bit_depth > 8 else np.uint8, copy=False)
        self.samples.setflags(write=False)

    @classmethod
    def from_float(cls, values, bit_depth: int = 8) -> "Frame":
        """Round and clip real values onto the integer sample grid."""
        top = (1 << bit_depth) - 1
        return cls(np.clip(np.rint(values), 0, top).astype(np.int64), bit_depth)

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def max_value(self) -> int:
        return (1 << self.bit_depth) - 1

    @cached_property
    def data(self) -> np.ndarray:
        """Samples as float64 (read-only)."""
        d = self.samples.astype(np.float64)
        d.setflags(write=False)
        return d

    def block(self, block: BlockSpec) -> np.ndarray:
        return self.data[block.y : block.y + block.height, block.x : block.x + block.width]


def check_same_geometry(a: Frame, b: Frame) -> None:
    if a.samples.shape != b.samples.shape or a.bit_depth != b.bit_depth:
        raise DimensionMismatch(
            f"{a.width}x{a.height}@{a.bit_depth}b vs {b.width}x{b.height}@{b.bit_depth}b"
        )


def sample_at(frame: Frame, p) -> np.ndarray | float:
    """Bilinearly interpolated value(s) at pixel coordinate(s) ``p`` (..., 2)."""
    p = np.asarray(p, dtype=np.float64)
    u, v = p[..., 0], p[..., 1]
    u0 = np.floor(u)
    v0 = np.floor(v)
    fu = u - u0
    fv = v - v0
    w, h = frame.width, frame.height
    c0 = np.mod(u0, w).astype(np.intp)
    c1 = np.mod(u0 + 1, w).astype(np.intp)
    r0 = np.clip(v0, 0, h - 1).astype(np.intp)
    r1 = np.clip(v0 + 1, 0, h - 1).astype(np.intp)
    img = frame.data
    top = img[r0, c0] * (1.0 - fu) + img[r0, c1] * fu
    bottom = img[r1, c0] * (1.0 - fu) + img[r1, c1] * fu
    out = top * (1.0 - fv) + bottom * fv
    return float(out) if out.ndim == 0 else out


def predict_block(ref: Frame, block: BlockSpec, field: MotionField) -> np.ndarray:
    """Motion-compensated prediction of ``block``, shape ``(height, width)``."""
    if field.block.width != block.width or field.block.height != block.height:
        raise DimensionMismatch("motion field geometry does not match block")
    return sample_at(ref, block.pixel_grid() + field.per_pixel())


def residual_energy(cur: Frame, pred_block, block: BlockSpec, metric: str = "sad") -> float:
    cur_block = cur.block(block)
    pred_block = np.asarray(pred_block, dtype=np.float64)
    if pred_block.shape != cur_block.shape:
        raise DimensionMismatch(f"prediction {pred_block.shape} vs block {cur_block.shape}")
    diff = cur_block - pred_block
    metric = metric.lower()
    if metric == "sad":
        return float(np.abs(diff).sum())
    if metric == "sse":
        return float((diff * diff).sum())
    raise ValueError(f"unknown residual metric {metric!r}")
