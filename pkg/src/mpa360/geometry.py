"""Coordinate conventions and motion-plane rotations.

World axes: ``y`` horizontal, ``z`` vertical (up), ``x`` perpendicular to
both.  The default camera sits at the origin and looks along ``-x``.
Spherical angles use ``theta`` as the polar angle measured from ``+z``
and ``phi`` as the azimuth measured from ``+x`` towards ``+y``.

All functions accept scalars or numpy arrays and broadcast; 3-vectors
live in the last axis.

Motion-plane rotations are active, right-handed rotations about the named
axis (column vectors, ``s_rotated = R @ s``)::

    FRONT_BACK   identity

    LEFT_RIGHT   Rz(pi/2) = [[0, -1, 0],
                             [1,  0, 0],
                             [0,  0, 1]]      (1,0,0) -> (0,1,0)

    TOP_BOTTOM   Ry(pi/2) = [[ 0, 0, 1],
                             [ 0, 1, 0],
                             [-1, 0, 0]]      (0,0,1) -> (1,0,0)

With TOP_BOTTOM the nadir ``(0, 0, -1)`` lands on the optical axis of the
real image plane, so ground motion is modelled on the real plane and sky
motion on the virtual one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

UNIT_TOL = 1e-9
ORTHO_TOL = 1e-12

TWO_PI = 2.0 * np.pi


class SphericalAngles(NamedTuple):
    theta: float | np.ndarray
    phi: float | np.ndarray


@dataclass(frozen=True)
class SphereCoord:
    """A point on the unit sphere.

    Direct construction rejects vectors whose norm is off by more than
    ``UNIT_TOL``; use :meth:`from_vector` to normalize arbitrary input.
    """

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        norm = float(np.sqrt(self.x * self.x + self.y * self.y + self.z * self.z))
        if not np.isfinite(norm) or abs(norm - 1.0) > UNIT_TOL:
            raise ValueError(f"not a unit vector (norm={norm!r})")

    @classmethod
    def from_vector(cls, vec) -> "SphereCoord":
        v = np.asarray(vec, dtype=np.float64).reshape(3)
        n = np.linalg.norm(v)
        if not np.isfinite(n) or n == 0.0:
            raise ValueError("cannot normalize a zero or non-finite vector")
        v = v / n
        return cls(float(v[0]), float(v[1]), float(v[2]))

    def __array__(self, dtype=None, copy=None):
        return np.array([self.x, self.y, self.z], dtype=dtype or np.float64)

    def __iter__(self):
        return iter((self.x, self.y, self.z))


class MotionPlane(enum.IntEnum):
    """The three predefined motion planes, in signaling order."""

    FRONT_BACK = 0
    LEFT_RIGHT = 1
    TOP_BOTTOM = 2

    @classmethod
    def parse(cls, name: str) -> "MotionPlane":
        key = name.strip().lower().replace("-", "").replace("_", "").replace("/", "")
        aliases = {
            "frontback": cls.FRONT_BACK,
            "fb": cls.FRONT_BACK,
            "leftright": cls.LEFT_RIGHT,
            "lr": cls.LEFT_RIGHT,
            "topbottom": cls.TOP_BOTTOM,
            "bottomtop": cls.TOP_BOTTOM,
            "tb": cls.TOP_BOTTOM,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown motion plane {name!r}") from None

    @property
    def label(self) -> str:
        return {0: "frontback", 1: "leftright", 2: "topbottom"}[int(self)]


@dataclass(frozen=True, eq=False)
class CustomPlane:
    """A motion plane given by an arbitrary rotation matrix."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = check_rotation(self.matrix)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


PlaneLike = Union[MotionPlane, CustomPlane]

_PLANE_MATRICES = {
    MotionPlane.FRONT_BACK: np.eye(3),
    MotionPlane.LEFT_RIGHT: np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
    MotionPlane.TOP_BOTTOM: np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]]),
}
for _m in _PLANE_MATRICES.values():
    _m.setflags(write=False)


def check_rotation(matrix) -> np.ndarray:
    """Return ``matrix`` as a float64 3x3 array, rejecting non-rotations."""
    m = np.array(matrix, dtype=np.float64)
    if m.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got shape {m.shape}")
    if not np.allclose(m.T @ m, np.eye(3), rtol=0.0, atol=ORTHO_TOL):
        raise ValueError("rotation matrix is not orthonormal")
    if abs(np.linalg.det(m) - 1.0) > ORTHO_TOL:
        raise ValueError("rotation matrix has det != +1")
    return m


def plane_rotation(plane: PlaneLike) -> np.ndarray:
    """Rotation matrix of a motion plane (read-only array)."""
    if isinstance(plane, CustomPlane):
        return plane.matrix
    return _PLANE_MATRICES[MotionPlane(plane)]


def rotate(matrix: np.ndarray, s) -> np.ndarray:
    """Apply ``matrix`` to the 3-vectors in the last axis of ``s``."""
    return np.asarray(s, dtype=np.float64) @ np.asarray(matrix).T


def unrotate(matrix: np.ndarray, s) -> np.ndarray:
    """Apply the inverse (transpose) of ``matrix``."""
    return np.asarray(s, dtype=np.float64) @ np.asarray(matrix)


def sphere_from_angles(theta, phi) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def wrap_angle(phi):
    """Wrap an azimuth into ``[0, 2*pi)``."""
    out = np.mod(phi, TWO_PI)
    # np.mod(-tiny, 2pi) rounds to exactly 2pi
    return np.where(out >= TWO_PI, 0.0, out)


def angles_from_sphere(s) -> SphericalAngles:
    """Polar and azimuthal angle of unit vectors.

    ``theta`` is computed as ``atan2(hypot(x, y), z)``, which equals
    ``arccos(z)`` on the unit sphere but stays accurate near the poles.
    At the poles the azimuth is reported as 0.
    """
    s = np.asarray(s, dtype=np.float64)
    x, y, z = s[..., 0], s[..., 1], s[..., 2]
    rho = np.hypot(x, y)
    theta = np.arctan2(rho, z)
    phi = np.where(rho == 0.0, 0.0, wrap_angle(np.arctan2(y, x)))
    if phi.ndim == 0:
        return SphericalAngles(float(theta), float(phi))
    return SphericalAngles(theta, phi)
