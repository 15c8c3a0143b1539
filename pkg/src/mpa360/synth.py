"""Synthetic ERP test material with planted motion.

Every generator returns ``(ref, cur)`` so that the true motion maps a
pixel ``p`` of ``cur`` to its source ``m(p)`` in ``ref``:
``cur(p) = ref(m(p))``.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .geometry import PlaneLike
from .motion import mpa_map
from .projection import ErpFormat, PerspectiveFormat, erp_inverse
from .sampling import Frame, sample_at


def texture(width: int, height: int, seed: int = 0, bit_depth: int = 8,
            scales: tuple[float, ...] = (1.5, 4.0), periodic_rows: bool = False) -> Frame:
    """Band-limited random texture, horizontally (optionally also vertically) periodic."""
    rng = np.random.default_rng(seed)
    img = np.zeros((height, width))
    for k, sigma in enumerate(scales):
        noise = rng.standard_normal((height, width))
        row_mode = "wrap" if periodic_rows else "nearest"
        layer = ndimage.gaussian_filter(noise, sigma, mode=(row_mode, "wrap"))
        img += layer / layer.std() * (1.0 / (k + 1))
    img = (img - img.mean()) / img.std()
    top = (1 << bit_depth) - 1
    return Frame.from_float(top * (0.5 + 0.16 * img), bit_depth)


def global_shift(ref: Frame, du: int, dv: int = 0) -> Frame:
    """``cur(u, v) = ref(u + du, v + dv)`` with circular addressing."""
    cur = np.roll(ref.samples, shift=(-dv, -du), axis=(0, 1))
    return Frame(cur, ref.bit_depth)


def mpa_warp(ref: Frame, plane: PlaneLike, t, persp: PerspectiveFormat | None = None) -> Frame:
    """Warp every pixel of ``ref`` with the MPA model (no subblock approximation).

    Pixels grazing on ``plane`` are moved translationally by ``t``.
    """
    erp = ErpFormat(ref.width, ref.height)
    persp = persp or PerspectiveFormat(erp.default_focal_length)
    vv, uu = np.mgrid[0 : ref.height, 0 : ref.width].astype(np.float64)
    p = np.stack([uu, vv], axis=-1)
    src = mpa_map(p, t, plane, erp, persp, strict=False)
    bad = np.isnan(src[..., 0])
    src[bad] = p[bad] + np.asarray(t, dtype=np.float64)
    return Frame.from_float(sample_at(ref, src), ref.bit_depth)


def ground_plane_pair(width: int, height: int, shift=(0.05, 0.03), camera_height: float = 1.0,
                      seed: int = 0, bit_depth: int = 8,
                      texture_scale: float = 0.02) -> tuple[Frame, Frame]:
    """Camera translating over a textured ground plane below a static sky.

    ``shift`` is the horizontal camera displacement ``(dx, dy)`` in world
    units between ``ref`` and ``cur``; ``texture_scale`` is the world
    size of one ground-texture texel.  Ground contrast fades towards the
    horizon to avoid aliasing.
    """
    tile = texture(512, 512, seed=seed + 1, bit_depth=bit_depth, scales=(2.0, 5.0),
                   periodic_rows=True)
    sky = texture(width, height, seed=seed + 2, bit_depth=bit_depth, scales=(6.0,))
    erp = ErpFormat(width, height)
    vv, uu = np.mgrid[0:height, 0:width].astype(np.float64)
    d = erp_inverse(np.stack([uu, vv], axis=-1), erp)
    mean = tile.data.mean()

    def render(cam) -> Frame:
        out = sky.data.copy()
        ground = d[..., 2] < -1e-6
        dist = camera_height / -d[ground, 2]
        gx = cam[0] + dist * d[ground, 0]
        gy = cam[1] + dist * d[ground, 1]
        val = ndimage.map_coordinates(tile.data, [gy / texture_scale, gx / texture_scale],
                                      order=1, mode="grid-wrap")
        fade = np.exp(-(np.maximum(dist - 1.0, 0.0) / 6.0) ** 2)
        out[ground] = mean + (val - mean) * fade
        return Frame.from_float(out, bit_depth)

    return render((0.0, 0.0)), render(tuple(shift))
