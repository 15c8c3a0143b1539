"""Raw planar YUV luma I/O and PPM plane-map images.

Samples are stored planar, one byte per sample for 8-bit video and two
little-endian bytes for 10-bit video.  Only the luma plane is read or
written; with 4:2:0 input the two quarter-size chroma planes of every
frame are skipped.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import BadGeometry, FileTooShort
from .motion import Model
from .sampling import Frame

CHROMA_FACTORS = {"400": 1.0, "420": 1.5}

# plane map colours: translational blocks are grey
PLANE_COLORS = {
    None: (128, 128, 128),
    0: (255, 0, 0),
    1: (0, 255, 0),
    2: (0, 0, 255),
}


def bytes_per_sample(bit_depth: int) -> int:
    if bit_depth == 8:
        return 1
    if bit_depth == 10:
        return 2
    raise BadGeometry(f"unsupported bit depth {bit_depth}")


def frame_bytes(width: int, height: int, bit_depth: int, chroma: str = "400") -> int:
    """Size of one stored frame (luma plus any chroma) in bytes."""
    if width <= 0 or height <= 0:
        raise BadGeometry(f"invalid raster {width}x{height}")
    try:
        factor = CHROMA_FACTORS[chroma]
    except KeyError:
        raise BadGeometry(f"unsupported chroma format {chroma!r}") from None
    if chroma == "420" and (width % 2 or height % 2):
        raise BadGeometry("4:2:0 needs even dimensions")
    return int(width * height * factor) * bytes_per_sample(bit_depth)


def frame_count(path, width: int, height: int, bit_depth: int, chroma: str = "400") -> int:
    size = os.path.getsize(path)
    per_frame = frame_bytes(width, height, bit_depth, chroma)
    if size % per_frame:
        raise BadGeometry(
            f"{path}: {size} bytes is not a multiple of the {per_frame}-byte frame size"
        )
    return size // per_frame


def read_yuv_luma(path, width: int, height: int, bit_depth: int = 8, frame_index: int = 0,
                  chroma: str = "400") -> Frame:
    """Read the luma plane of frame ``frame_index``."""
    per_frame = frame_bytes(width, height, bit_depth, chroma)
    bps = bytes_per_sample(bit_depth)
    if frame_index < 0:
        raise BadGeometry(f"negative frame index {frame_index}")
    size = os.path.getsize(path)
    if size % per_frame:
        raise BadGeometry(
            f"{path}: {size} bytes is not a multiple of the {per_frame}-byte frame size"
        )
    if (frame_index + 1) * per_frame > size:
        raise FileTooShort(f"{path}: frame {frame_index} needs {(frame_index + 1) * per_frame} bytes, file has {size}")
    dtype = np.uint8 if bps == 1 else np.dtype("<u2")
    with open(path, "rb") as fh:
        fh.seek(frame_index * per_frame)
        luma = np.fromfile(fh, dtype=dtype, count=width * height)
    samples = luma.reshape(height, width)
    if samples.max(initial=0) > (1 << bit_depth) - 1:
        raise BadGeometry(f"{path}: sample values exceed {bit_depth} bits")
    return Frame(samples, bit_depth)


def write_yuv_luma(path, frames: Frame | Sequence[Frame], chroma: str = "400",
                   append: bool = False) -> None:
    """Write one or more frames; 4:2:0 output gets mid-grey chroma planes."""
    if isinstance(frames, Frame):
        frames = [frames]
    with open(path, "ab" if append else "wb") as fh:
        for frame in frames:
            dtype = np.uint8 if frame.bit_depth == 8 else np.dtype("<u2")
            fh.write(np.ascontiguousarray(frame.samples, dtype=dtype).tobytes())
            if chroma == "420":
                grey = np.full((frame.height // 2) * (frame.width // 2) * 2,
                               1 << (frame.bit_depth - 1), dtype=dtype)
                fh.write(grey.tobytes())
            elif chroma != "400":
                raise BadGeometry(f"unsupported chroma format {chroma!r}")


def write_ppm(path, rgb: np.ndarray) -> None:
    """Binary PPM (P6) writer for an ``(H, W, 3)`` uint8 image."""
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got {rgb.shape}")
    h, w, _ = rgb.shape
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes())


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P6" or int(parts[3]) != 255:
        raise ValueError(f"{path}: not an 8-bit P6 image")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4], dtype=np.uint8, count=w * h * 3).reshape(h, w, 3)


def plane_map_image(width: int, height: int, decisions) -> np.ndarray:
    """Colour each block by its motion plane (MPA) or grey (translational)."""
    img = np.zeros((height, width, 3), dtype=np.uint8)
    for d in decisions:
        b = d.block
        key = int(d.mi.plane) if d.mi.model is Model.MPA else None
        img[b.y : b.y + b.height, b.x : b.x + b.width] = PLANE_COLORS.get(key, (255, 255, 255))
    return img
