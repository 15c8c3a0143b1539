"""Translational and motion-plane-adaptive (MPA) motion models.

The MPA model moves an ERP pixel by projecting it onto a motion plane,
translating it there and projecting it back::

    p_m = erp( R^T persp^-1( persp( R erp^-1(p) ) + t ) )

Whole blocks are handled on a 4x4 subblock grid: the model is evaluated
once per subblock at the pixel in its second row and second column, and
all 16 pixels share the resulting displacement.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geometry import MotionPlane, PlaneLike, plane_rotation, rotate, unrotate
from .projection import (
    ErpFormat,
    PerspectiveFormat,
    PerspectivePoint,
    erp_forward,
    erp_inverse,
    perspective_forward,
    perspective_inverse,
)

log = logging.getLogger(__name__)

SUBBLOCK = 4
ANCHOR_OFFSET = 1
DEFAULT_QUANT_STEP = 1.0 / 16.0


class MotionVector(NamedTuple):
    du: float
    dv: float

    def l1(self) -> float:
        return abs(self.du) + abs(self.dv)


ZERO_MV = MotionVector(0.0, 0.0)


class Model(enum.IntEnum):
    TRANSLATIONAL = 0
    MPA = 1


@dataclass(frozen=True)
class MotionInfo:
    model: Model
    mv: MotionVector = ZERO_MV
    plane: PlaneLike = MotionPlane.FRONT_BACK
    ref_index: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "model", Model(self.model))
        object.__setattr__(self, "mv", MotionVector(float(self.mv[0]), float(self.mv[1])))
        if self.model is Model.TRANSLATIONAL:
            object.__setattr__(self, "plane", MotionPlane.FRONT_BACK)


@dataclass(frozen=True)
class BlockSpec:
    x: int
    y: int
    width: int = 16
    height: int = 16

    def __post_init__(self) -> None:
        for size in (self.width, self.height):
            if size < SUBBLOCK or size % SUBBLOCK:
                raise ValueError(f"block sizes must be positive multiples of 4, got {size}")

    def fits(self, width: int, height: int) -> bool:
        return (
            self.x >= 0
            and self.y >= 0
            and self.x + self.width <= width
            and self.y + self.height <= height
        )

    def pixel_grid(self) -> np.ndarray:
        """Integer pixel coordinates of the block, shape ``(height, width, 2)``."""
        vv, uu = np.mgrid[self.y : self.y + self.height, self.x : self.x + self.width]
        return np.stack([uu, vv], axis=-1).astype(np.float64)

    def anchors(self) -> np.ndarray:
        """Subblock anchor pixels, shape ``(height/4, width/4, 2)``."""
        rows = self.y + ANCHOR_OFFSET + SUBBLOCK * np.arange(self.height // SUBBLOCK)
        cols = self.x + ANCHOR_OFFSET + SUBBLOCK * np.arange(self.width // SUBBLOCK)
        vv, uu = np.meshgrid(rows, cols, indexing="ij")
        return np.stack([uu, vv], axis=-1).astype(np.float64)


@dataclass
class MotionField:
    """Per-subblock displacement grid of one block.

    ``displacements[j, i]`` is the ``(du, dv)`` shift shared by the pixels
    of subblock row ``j``, column ``i``.
    """

    block: BlockSpec
    displacements: np.ndarray
    fallbacks: int = 0

    def __post_init__(self) -> None:
        shape = (self.block.height // SUBBLOCK, self.block.width // SUBBLOCK, 2)
        if self.displacements.shape != shape:
            raise ValueError(f"field shape {self.displacements.shape} != {shape}")

    def per_pixel(self) -> np.ndarray:
        """Displacements expanded to shape ``(height, width, 2)``."""
        return np.repeat(np.repeat(self.displacements, SUBBLOCK, axis=0), SUBBLOCK, axis=1)

    def source_positions(self) -> np.ndarray:
        return self.block.pixel_grid() + self.per_pixel()


def translational_map(p, t) -> np.ndarray:
    return np.asarray(p, dtype=np.float64) + np.asarray(t, dtype=np.float64)


def to_plane(p_o, plane: PlaneLike, erp: ErpFormat, persp: PerspectiveFormat,
             *, strict: bool = True) -> PerspectivePoint:
    """ERP pixel -> coordinate on the motion plane (first step of the model)."""
    s = rotate(plane_rotation(plane), erp_inverse(p_o, erp))
    return perspective_forward(s, persp, strict=strict)


def from_plane(pp: PerspectivePoint, plane: PlaneLike, erp: ErpFormat,
               persp: PerspectiveFormat) -> np.ndarray:
    """Motion-plane coordinate -> ERP pixel (last step of the model)."""
    s = unrotate(plane_rotation(plane), perspective_inverse(pp, persp))
    return erp_forward(s, erp)


def mpa_map(p_o, t, plane: PlaneLike, erp: ErpFormat, persp: PerspectiveFormat,
            *, strict: bool = True) -> np.ndarray:
    """Move ERP pixel(s) ``p_o`` by ``t`` on the given motion plane.

    The plane selector ``b_vip`` of the unmoved point is reused when
    projecting back, so motion never switches a point between the real
    and the virtual plane.  Raises :class:`GrazingRay` when ``p_o`` is
    parallel to the plane (NaN with ``strict=False``).
    """
    pp = to_plane(p_o, plane, erp, persp, strict=strict)
    moved = PerspectivePoint(pp.coord + np.asarray(t, dtype=np.float64), pp.b_vip)
    return from_plane(moved, plane, erp, persp)


def quantize(values, step: float | None):
    if not step:
        return np.asarray(values, dtype=np.float64)
    return np.round(np.asarray(values, dtype=np.float64) / step) * step


class PlaneAnchors:
    """Plane coordinates of a set of ERP anchors, cached for repeated moves.

    Motion search evaluates many candidate vectors on the same anchors;
    the forward projection is done once here.
    """

    def __init__(self, anchors, plane: PlaneLike, erp: ErpFormat, persp: PerspectiveFormat):
        self.anchors = np.asarray(anchors, dtype=np.float64)
        self.plane = plane
        self.erp = erp
        self.persp = persp
        self.point = to_plane(self.anchors, plane, erp, persp, strict=False)
        self.grazing = np.isnan(self.point.coord[..., 0])

    def displacements(self, ts, quant_step: float | None = DEFAULT_QUANT_STEP):
        """Displacements for candidate vectors ``ts`` of shape ``(K, 2)``.

        Returns ``(disp, fallback)`` with ``disp`` of shape
        ``(K, *anchors.shape)``.  Grazing anchors fall back to the
        translational displacement ``t`` and are flagged in ``fallback``.
        """
        ts = np.asarray(ts, dtype=np.float64).reshape(-1, 2)
        extra = (1,) * (self.anchors.ndim - 1)
        t_b = ts.reshape((ts.shape[0],) + extra + (2,))
        moved = PerspectivePoint(self.point.coord[None] + t_b, self.point.b_vip)
        mapped = from_plane(moved, self.plane, self.erp, self.persp)
        disp = mapped - self.anchors[None]
        disp[..., 0] = self.erp.wrap_du(disp[..., 0])
        fallback = np.broadcast_to(self.grazing[None], disp.shape[:-1])
        disp = np.where(fallback[..., None], np.broadcast_to(t_b, disp.shape), disp)
        return quantize(disp, quant_step), fallback


def build_motion_field(block: BlockSpec, mi: MotionInfo, erp: ErpFormat,
                       persp: PerspectiveFormat,
                       quant_step: float | None = DEFAULT_QUANT_STEP) -> MotionField:
    rows, cols = block.height // SUBBLOCK, block.width // SUBBLOCK
    if mi.model is Model.TRANSLATIONAL:
        disp = np.broadcast_to(np.array(mi.mv, dtype=np.float64), (rows, cols, 2)).copy()
        return MotionField(block, disp)
    pa = PlaneAnchors(block.anchors(), mi.plane, erp, persp)
    disp, fallback = pa.displacements([mi.mv], quant_step)
    n = int(fallback.sum())
    if n:
        log.debug("block %s: %d grazing subblock(s) fell back to translational", block, n)
    return MotionField(block, disp[0], fallbacks=n)
