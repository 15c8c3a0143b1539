"""PSNR variants for ERP rasters.

All functions return ``math.inf`` for identical inputs.  Squared errors
are reduced per row first and then across rows (numpy's pairwise
summation in both steps).
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .geometry import sphere_from_angles
from .projection import ErpFormat, erp_forward
from .sampling import Frame, check_same_geometry

DEFAULT_SPHERE_POINTS = 655_362
GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0


def _psnr_from_mse(mse: float, max_value: int) -> float:
    if mse <= 0.0:
        return math.inf
    return 10.0 * math.log10(max_value * max_value / mse)


def _squared_error(a: Frame, b: Frame) -> np.ndarray:
    check_same_geometry(a, b)
    d = a.data - b.data
    return d * d


def psnr(a: Frame, b: Frame) -> float:
    se = _squared_error(a, b)
    return _psnr_from_mse(float(se.sum(axis=1).sum()) / se.size, a.max_value)


def ws_row_weights(height: int) -> np.ndarray:
    """Cosine latitude weight of every ERP row (unnormalized)."""
    j = np.arange(height, dtype=np.float64)
    return np.cos((j + 0.5 - height / 2.0) * np.pi / height)


def ws_weights(width: int, height: int) -> np.ndarray:
    """Per-pixel WS-PSNR weights normalized to sum to one, shape ``(height, width)``."""
    w = np.broadcast_to(ws_row_weights(height)[:, None], (height, width))
    return w / w.sum(axis=1).sum()


def ws_psnr(a: Frame, b: Frame) -> float:
    se = _squared_error(a, b)
    rows = ws_row_weights(a.height)
    wmse = float((se.sum(axis=1) * rows).sum()) / (float(rows.sum()) * a.width)
    return _psnr_from_mse(wmse, a.max_value)


def fibonacci_sphere(n_points: int) -> np.ndarray:
    """``n_points`` near-uniform unit vectors on a Fibonacci spiral, shape ``(n, 3)``."""
    i = np.arange(n_points, dtype=np.float64)
    z = 1.0 - (2.0 * i + 1.0) / n_points
    theta = np.arccos(z)
    phi = np.mod(2.0 * np.pi * i / GOLDEN_RATIO, 2.0 * np.pi)
    return sphere_from_angles(theta, phi)


@lru_cache(maxsize=8)
def _lattice_sites(n_points: int, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    uv = erp_forward(fibonacci_sphere(n_points), ErpFormat(width, height))
    cols = np.mod(np.rint(uv[:, 0]), width).astype(np.intp)
    rows = np.clip(np.rint(uv[:, 1]), 0, height - 1).astype(np.intp)
    cols.setflags(write=False)
    rows.setflags(write=False)
    return rows, cols


def s_psnr_nn(a: Frame, b: Frame, n_points: int = DEFAULT_SPHERE_POINTS) -> float:
    """Spherical PSNR with nearest-neighbour lookup of lattice points."""
    if n_points < 100:
        raise ValueError("n_points must be at least 100")
    check_same_geometry(a, b)
    rows, cols = _lattice_sites(n_points, a.width, a.height)
    d = a.data[rows, cols] - b.data[rows, cols]
    return _psnr_from_mse(float((d * d).sum()) / n_points, a.max_value)
