"""Motion-vector translation between motion planes and motion models.

A candidate vector found at a neighbouring position ``p_s`` is rewritten
so that, applied at that same anchor, it produces the same displacement
in the ERP domain under the target model / plane.  Callers treat
:class:`NonRepresentable` and :class:`GrazingRay` as "candidate
unavailable".

Results are unquantized unless ``quant_step`` is given.
"""

from __future__ import annotations

import numpy as np

from .errors import NonRepresentable
from .geometry import PlaneLike, plane_rotation, rotate, unrotate
from .motion import MotionVector, mpa_map, quantize, to_plane
from .projection import ErpFormat, PerspectiveFormat, perspective_forward, perspective_inverse


def _result(t, quant_step):
    t = quantize(t, quant_step)
    if t.ndim == 1:
        return MotionVector(float(t[0]), float(t[1]))
    return t


def _check_same_plane_side(b_moved, b_anchor) -> None:
    if np.any(np.asarray(b_moved) != np.asarray(b_anchor)):
        raise NonRepresentable("moved point switches between real and virtual image plane")


def translate_plane_to_plane(p_s, t_s, plane_s: PlaneLike, plane_t: PlaneLike,
                             erp: ErpFormat, persp: PerspectiveFormat,
                             quant_step: float | None = None):
    """Vector on ``plane_t`` equivalent to ``t_s`` on ``plane_s`` at anchor ``p_s``."""
    r_s = plane_rotation(plane_s)
    r_t = plane_rotation(plane_t)
    src = to_plane(p_s, plane_s, erp, persp)
    moved_plane = src.coord + np.asarray(t_s, dtype=np.float64)
    moved_sphere = unrotate(r_s, perspective_inverse((moved_plane, src.b_vip), persp))
    moved = perspective_forward(rotate(r_t, moved_sphere), persp)
    anchor = to_plane(p_s, plane_t, erp, persp)
    _check_same_plane_side(moved.b_vip, anchor.b_vip)
    return _result(moved.coord - anchor.coord, quant_step)


def translate_mpa_to_translational(p_s, t_s, plane_s: PlaneLike, erp: ErpFormat,
                                   persp: PerspectiveFormat,
                                   quant_step: float | None = None):
    """Classical vector reproducing the MPA move of anchor ``p_s``.

    The horizontal component is the shortest wrap-around difference, so a
    move across the ERP seam yields a small vector rather than one near
    ``+-U``.
    """
    p_s = np.asarray(p_s, dtype=np.float64)
    d = mpa_map(p_s, t_s, plane_s, erp, persp) - p_s
    d[..., 0] = erp.wrap_du(d[..., 0])
    return _result(d, quant_step)


def translate_translational_to_mpa(p_s, t_s, plane_t: PlaneLike, erp: ErpFormat,
                                   persp: PerspectiveFormat,
                                   quant_step: float | None = None):
    """Vector on ``plane_t`` reproducing the classical move of anchor ``p_s``."""
    p_s = np.asarray(p_s, dtype=np.float64)
    anchor = to_plane(p_s, plane_t, erp, persp)
    moved = to_plane(p_s + np.asarray(t_s, dtype=np.float64), plane_t, erp, persp)
    _check_same_plane_side(moved.b_vip, anchor.b_vip)
    return _result(moved.coord - anchor.coord, quant_step)
