"""Sphere <-> image-plane projections.

Two projections are provided: the equirectangular projection (ERP) used
as the 360-degree storage format, and a generalized perspective
projection with a *virtual* image plane behind the lens, so that every
ray except those exactly parallel to the image planes has a plane
coordinate.  Which of the two planes a ray hits is carried explicitly as
``b_vip`` (0 = real plane, 1 = virtual plane).

ERP pixel coordinates have no half-pixel offset: ``u = phi / (2 pi) * U``
and ``v = theta / pi * V``, so integer raster sites sit at integer
coordinates and row 0 is the north pole.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import GrazingRay
from .geometry import TWO_PI, angles_from_sphere, sphere_from_angles

GRAZING_EPS = 1e-9


class PixelCoord(NamedTuple):
    u: float
    v: float


class PerspectivePoint(NamedTuple):
    """Plane coordinate(s) plus the plane selector.

    ``coord`` has shape ``(..., 2)``; ``b_vip`` broadcasts against
    ``coord[..., 0]``.
    """

    coord: np.ndarray
    b_vip: np.ndarray | int


@dataclass(frozen=True)
class ErpFormat:
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width < 2 or self.height < 2:
            raise ValueError(f"ERP raster too small: {self.width}x{self.height}")
        if self.width != 2 * self.height:
            warnings.warn(
                f"ERP raster {self.width}x{self.height} is not 2:1", stacklevel=3
            )

    @property
    def default_focal_length(self) -> float:
        return default_focal_length(self)

    def wrap_du(self, du):
        """Map a horizontal difference to its shortest representative."""
        w = self.width
        return np.mod(np.asarray(du, dtype=np.float64) + w / 2.0, w) - w / 2.0


@dataclass(frozen=True)
class PerspectiveFormat:
    focal_length: float

    def __post_init__(self) -> None:
        if not (self.focal_length > 0 and math.isfinite(self.focal_length)):
            raise ValueError(f"focal length must be positive, got {self.focal_length}")


def default_focal_length(fmt: ErpFormat) -> float:
    """Focal length matching the ERP pixel density at the equator."""
    if fmt.height < 3:
        raise ValueError("default focal length needs V >= 3")
    return 1.0 / math.tan(math.pi / fmt.height)


def erp_forward(s, fmt: ErpFormat) -> np.ndarray:
    theta, phi = angles_from_sphere(s)
    u = np.asarray(phi) / TWO_PI * fmt.width
    # phi < 2pi can still round up to u == U
    u = np.where(u >= fmt.width, 0.0, u)
    v = np.asarray(theta) / np.pi * fmt.height
    return np.stack([u, v], axis=-1)


def erp_inverse(p, fmt: ErpFormat) -> np.ndarray:
    """ERP pixel coordinate to unit sphere; ``u`` wraps, ``v`` clamps."""
    p = np.asarray(p, dtype=np.float64)
    u = np.mod(p[..., 0], fmt.width)
    v = np.clip(p[..., 1], 0.0, fmt.height)
    phi = u / fmt.width * TWO_PI
    theta = v / fmt.height * np.pi
    return sphere_from_angles(theta, phi)


def perspective_angles(s):
    """Incident angle and azimuth of ``s`` in the camera system.

    The incident angle is ``arccos(-x)``; it is evaluated as
    ``atan2(hypot(y, z), -x)`` for accuracy near the optical axis.
    """
    s = np.asarray(s, dtype=np.float64)
    x, y, z = s[..., 0], s[..., 1], s[..., 2]
    theta_p = np.arctan2(np.hypot(y, z), -x)
    phi_p = np.arctan2(-z, y)
    return theta_p, phi_p


def is_grazing(s) -> np.ndarray:
    theta_p, _ = perspective_angles(s)
    return np.abs(theta_p - np.pi / 2) <= GRAZING_EPS


def perspective_forward(s, fmt: PerspectiveFormat, *, strict: bool = True) -> PerspectivePoint:
    """Project unit vectors onto the real or virtual image plane.

    Raises :class:`GrazingRay` if any ray lies within ``GRAZING_EPS`` of
    the image planes.  With ``strict=False`` such entries come back as NaN
    coordinates instead.
    """
    theta_p, phi_p = perspective_angles(s)
    grazing = np.abs(theta_p - np.pi / 2) <= GRAZING_EPS
    if strict and np.any(grazing):
        raise GrazingRay("ray parallel to the image plane")
    b_vip = (theta_p > np.pi / 2).astype(np.int8)
    incident = np.where(b_vip == 1, np.pi - theta_p, theta_p)
    with np.errstate(invalid="ignore", over="ignore"):
        r = fmt.focal_length * np.tan(incident)
        r = np.where(grazing, np.nan, r)
    coord = np.stack([r * np.cos(phi_p), r * np.sin(phi_p)], axis=-1)
    if b_vip.ndim == 0:
        b_vip = int(b_vip)
    return PerspectivePoint(coord, b_vip)


def perspective_inverse(pp: PerspectivePoint, fmt: PerspectiveFormat) -> np.ndarray:
    coord, b_vip = pp
    coord = np.asarray(coord, dtype=np.float64)
    u, v = coord[..., 0], coord[..., 1]
    r = np.hypot(u, v)
    phi_p = np.arctan2(v, u)
    theta_p = np.arctan(r / fmt.focal_length)
    theta_p = np.where(np.asarray(b_vip) == 1, np.pi - theta_p, theta_p)
    st = np.sin(theta_p)
    return np.stack([-np.cos(theta_p), st * np.cos(phi_p), -st * np.sin(phi_p)], axis=-1)
