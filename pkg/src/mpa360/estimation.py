"""Encoder-side block motion search with per-plane MPA search.

Every block is searched with the classical translational model and, for
MPA, independently on each of the three motion planes.  The candidate
with the lowest cost ``SAD + lambda * bits`` wins.  The bit count is a
static proxy: signed Exp-Golomb lengths of the quarter-pel motion vector
difference plus the model / plane bins (1 bin for translational, 2 for
MPA front/back, 3 for MPA left/right or top/bottom).

Search windows are fixed around the zero vector (``|du|, |dv| <=
search_range``).  Start vectors only seed the diamond search and serve
as the predictor for the vector difference; with ``cfg.mvp`` they are
derived from already decided neighbours by translating their motion
information into the target model / plane.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import GrazingRay, NonRepresentable
from .geometry import MotionPlane
from .metrics import psnr, ws_psnr
from .motion import (
    DEFAULT_QUANT_STEP,
    SUBBLOCK,
    BlockSpec,
    Model,
    MotionInfo,
    MotionVector,
    PlaneAnchors,
    ZERO_MV,
    build_motion_field,
)
from .mvp import (
    translate_mpa_to_translational,
    translate_plane_to_plane,
    translate_translational_to_mpa,
)
from .projection import ErpFormat, PerspectiveFormat
from .sampling import Frame, check_same_geometry, predict_block, sample_at

log = logging.getLogger(__name__)

PLANES = (MotionPlane.FRONT_BACK, MotionPlane.LEFT_RIGHT, MotionPlane.TOP_BOTTOM)
MODES = ("translational", "mpa", "both")
MVD_UNITS_PER_PIXEL = 4
FRACTIONAL_STEPS = {"off": (), "half": (0.5,), "quarter": (0.5, 0.25)}

_LARGE_DIAMOND = ((0, 0), (0, -2), (0, 2), (-2, 0), (2, 0), (-1, -1), (1, -1), (-1, 1), (1, 1))
_SMALL_DIAMOND = ((0, 0), (0, -1), (0, 1), (-1, 0), (1, 0))
_SQUARE = ((-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1))


@dataclass(frozen=True)
class SearchConfig:
    search_range: int = 8
    fractional_refine: str = "off"
    lam: float = 4.0
    strategy: str = "exhaustive"
    mvp: bool = True
    quant_step: float | None = DEFAULT_QUANT_STEP

    def __post_init__(self) -> None:
        if self.search_range < 1:
            raise ValueError("search_range must be >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.fractional_refine not in FRACTIONAL_STEPS:
            raise ValueError(f"fractional_refine must be one of {sorted(FRACTIONAL_STEPS)}")
        if self.strategy not in ("exhaustive", "diamond"):
            raise ValueError("strategy must be 'exhaustive' or 'diamond'")

    def lambda_for(self, bit_depth: int) -> float:
        """Lambda for SAD costs; scales linearly with the sample range."""
        return self.lam * float(1 << (bit_depth - 8))


@dataclass
class BlockDecision:
    mi: MotionInfo
    cost: float
    distortion: float
    rate_bits_proxy: float
    block: BlockSpec | None = None
    evaluations: int = 0
    start: MotionVector = ZERO_MV

    def sort_key(self) -> tuple:
        """Total order: cost, then translational, front/back, ..., then small |mv|."""
        plane = -1 if self.mi.model is Model.TRANSLATIONAL else int(self.mi.plane)
        return (self.cost, plane, self.mi.mv.l1(), self.mi.mv.du, self.mi.mv.dv)


def se_golomb_bits(value: int) -> int:
    """Length of the signed Exp-Golomb code of ``value``."""
    code = 2 * value - 1 if value > 0 else -2 * value
    return 2 * int(code + 1).bit_length() - 1


def mvd_bits(mv, start) -> int:
    return sum(
        se_golomb_bits(int(round((a - b) * MVD_UNITS_PER_PIXEL))) for a, b in zip(mv, start)
    )


def model_bits(model: Model, plane: MotionPlane | None = None) -> int:
    if model is Model.TRANSLATIONAL:
        return 1
    return 2 if plane == MotionPlane.FRONT_BACK else 3


class BlockEvaluator:
    """SAD of one block under candidate motion, memoized per (model, plane, mv).

    ``evaluations`` counts distinct distortion computations and is the
    complexity measure reported by the search.
    """

    def __init__(self, cur: Frame, ref: Frame, block: BlockSpec, erp: ErpFormat | None,
                 persp: PerspectiveFormat | None, quant_step: float | None = DEFAULT_QUANT_STEP):
        check_same_geometry(cur, ref)
        if not block.fits(cur.width, cur.height):
            raise ValueError(f"{block} outside the {cur.width}x{cur.height} frame")
        self.cur_block = cur.block(block)
        self.ref = ref
        self.block = block
        self.erp = erp
        self.persp = persp
        self.quant_step = quant_step
        self.grid = block.pixel_grid()
        self.evaluations = 0
        self._cache: dict[tuple, float] = {}
        self._anchors: dict[MotionPlane, PlaneAnchors] = {}

    def _plane_anchors(self, plane: MotionPlane) -> PlaneAnchors:
        if plane not in self._anchors:
            if self.erp is None or self.persp is None:
                raise ValueError("MPA evaluation needs ERP and perspective formats")
            self._anchors[plane] = PlaneAnchors(self.block.anchors(), plane, self.erp, self.persp)
        return self._anchors[plane]

    def _compute(self, model: Model, plane: MotionPlane | None, mvs: np.ndarray) -> np.ndarray:
        if model is Model.TRANSLATIONAL:
            disp = np.broadcast_to(mvs[:, None, None, :], (len(mvs),) + self.grid.shape)
        else:
            sub, _ = self._plane_anchors(plane).displacements(mvs, self.quant_step)
            disp = np.repeat(np.repeat(sub, SUBBLOCK, axis=1), SUBBLOCK, axis=2)
        pred = sample_at(self.ref, self.grid[None] + disp)
        return np.abs(pred - self.cur_block[None]).sum(axis=(1, 2))

    def sad(self, model: Model, plane: MotionPlane | None, mvs: Iterable) -> list[float]:
        mvs = [(float(a), float(b)) for a, b in mvs]
        key_plane = None if model is Model.TRANSLATIONAL else plane
        missing = [mv for mv in dict.fromkeys(mvs) if (model, key_plane, mv) not in self._cache]
        if missing:
            values = self._compute(model, key_plane, np.array(missing, dtype=np.float64))
            for mv, val in zip(missing, values):
                self._cache[(model, key_plane, mv)] = float(val)
            self.evaluations += len(missing)
        return [self._cache[(model, key_plane, mv)] for mv in mvs]


def _clip_to_window(mv, rng: int) -> tuple[float, float]:
    return (min(max(float(mv[0]), -rng), rng), min(max(float(mv[1]), -rng), rng))


class _Search:
    """Motion search for one (model, plane) on one block."""

    def __init__(self, ev: BlockEvaluator, model: Model, plane: MotionPlane | None,
                 start, cfg: SearchConfig, lam: float):
        self.ev = ev
        self.model = model
        self.plane = plane
        self.start = MotionVector(float(start[0]), float(start[1]))
        self.cfg = cfg
        self.lam = lam
        self.side_bits = model_bits(model, plane)

    def rate(self, mv) -> int:
        return mvd_bits(mv, self.start) + self.side_bits

    def _key(self, mv, cost):
        return (cost, abs(mv[0]) + abs(mv[1]), mv[0], mv[1])

    def best_of(self, mvs) -> tuple[tuple[float, float], float]:
        rng = self.cfg.search_range
        mvs = [mv for mv in dict.fromkeys(mvs) if abs(mv[0]) <= rng and abs(mv[1]) <= rng]
        sads = self.ev.sad(self.model, self.plane, mvs)
        costs = [d + self.lam * self.rate(mv) for mv, d in zip(mvs, sads)]
        i = min(range(len(mvs)), key=lambda k: self._key(mvs[k], costs[k]))
        return mvs[i], costs[i]

    def integer_search(self) -> tuple[float, float]:
        rng = self.cfg.search_range
        if self.cfg.strategy == "exhaustive":
            offs = range(-rng, rng + 1)
            return self.best_of([(float(a), float(b)) for b in offs for a in offs])[0]
        center = _clip_to_window((round(self.start[0]), round(self.start[1])), rng)
        for _ in range(4 * rng + 4):
            best, _ = self.best_of([(center[0] + a, center[1] + b) for a, b in _LARGE_DIAMOND])
            if best == center:
                break
            center = best
        return self.best_of([(center[0] + a, center[1] + b) for a, b in _SMALL_DIAMOND])[0]

    def run(self) -> BlockDecision:
        best = self.integer_search()
        for step in FRACTIONAL_STEPS[self.cfg.fractional_refine]:
            best = self.best_of([best] + [(best[0] + a * step, best[1] + b * step) for a, b in _SQUARE])[0]
        sad = self.ev.sad(self.model, self.plane, [best])[0]
        rate = self.rate(best)
        mi = MotionInfo(self.model, MotionVector(*best),
                        self.plane if self.plane is not None else MotionPlane.FRONT_BACK)
        return BlockDecision(mi, sad + self.lam * rate, sad, float(rate), self.ev.block,
                             start=self.start)


def _finish(decision: BlockDecision, ev: BlockEvaluator) -> BlockDecision:
    decision.evaluations = ev.evaluations
    return decision


def search_translational(cur: Frame, ref: Frame, block: BlockSpec, start=ZERO_MV,
                         cfg: SearchConfig = SearchConfig(), *,
                         evaluator: BlockEvaluator | None = None) -> BlockDecision:
    ev = evaluator or BlockEvaluator(cur, ref, block, None, None, cfg.quant_step)
    d = _Search(ev, Model.TRANSLATIONAL, None, start, cfg, cfg.lambda_for(cur.bit_depth)).run()
    return _finish(d, ev)


def search_mpa(cur: Frame, ref: Frame, block: BlockSpec,
               starts: Mapping[MotionPlane, Sequence[float]] | None,
               cfg: SearchConfig, erp: ErpFormat, persp: PerspectiveFormat, *,
               evaluator: BlockEvaluator | None = None) -> BlockDecision:
    """Run one search per motion plane and keep the cheapest (plane, mv)."""
    ev = evaluator or BlockEvaluator(cur, ref, block, erp, persp, cfg.quant_step)
    lam = cfg.lambda_for(cur.bit_depth)
    starts = starts or {}
    results = [
        _Search(ev, Model.MPA, plane, starts.get(plane, ZERO_MV), cfg, lam).run()
        for plane in PLANES
    ]
    return _finish(min(results, key=BlockDecision.sort_key), ev)


def _neighbor_anchor(block: BlockSpec, neighbor: BlockSpec) -> np.ndarray:
    """Pixel of ``neighbor`` closest to the centre of ``block``."""
    cu = block.x + (block.width - 1) / 2.0
    cv = block.y + (block.height - 1) / 2.0
    u = min(max(math.floor(cu), neighbor.x), neighbor.x + neighbor.width - 1)
    v = min(max(math.floor(cv), neighbor.y), neighbor.y + neighbor.height - 1)
    return np.array([u, v], dtype=np.float64)


def mvp_candidates(block: BlockSpec, neighbors: Sequence[BlockDecision],
                   erp: ErpFormat, persp: PerspectiveFormat,
                   ) -> dict[tuple[Model, MotionPlane | None], list[MotionVector]]:
    """Neighbour motion translated into every target (model, plane).

    Unavailable translations (grazing or plane switch) are skipped.
    Vectors are rounded to the quarter-pel search grid after translation.
    """
    out: dict[tuple[Model, MotionPlane | None], list[MotionVector]] = {
        (Model.TRANSLATIONAL, None): [],
        **{(Model.MPA, p): [] for p in PLANES},
    }
    q = 1.0 / MVD_UNITS_PER_PIXEL
    for nb in neighbors:
        if nb.block is None:
            continue
        anchor = _neighbor_anchor(block, nb.block)
        src = nb.mi
        for (model, plane), bucket in out.items():
            try:
                if model is Model.TRANSLATIONAL:
                    if src.model is Model.TRANSLATIONAL:
                        t = src.mv
                    else:
                        t = translate_mpa_to_translational(anchor, src.mv, src.plane, erp, persp, q)
                elif src.model is Model.TRANSLATIONAL:
                    t = translate_translational_to_mpa(anchor, src.mv, plane, erp, persp, q)
                elif src.plane == plane:
                    t = src.mv
                else:
                    t = translate_plane_to_plane(anchor, src.mv, src.plane, plane, erp, persp, q)
            except (GrazingRay, NonRepresentable):
                continue
            t = MotionVector(float(t[0]), float(t[1]))
            if all(np.isfinite(t)) and t not in bucket:
                bucket.append(t)
    return out


def decide_block(cur: Frame, ref: Frame, block: BlockSpec,
                 neighbor_decisions: Sequence[BlockDecision], cfg: SearchConfig,
                 erp: ErpFormat, persp: PerspectiveFormat, mode: str = "both") -> BlockDecision:
    """RD decision between the translational model and MPA for one block.

    With ``cfg.mvp`` each search starts from the neighbour candidate with
    the lowest cost (candidates are evaluated and counted); otherwise from
    the zero vector.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    ev = BlockEvaluator(cur, ref, block, erp, persp, cfg.quant_step)
    lam = cfg.lambda_for(cur.bit_depth)
    cands = mvp_candidates(block, neighbor_decisions, erp, persp) if cfg.mvp else {}

    def pick_start(model: Model, plane: MotionPlane | None) -> MotionVector:
        options = [_clip_to_window(t, cfg.search_range) for t in cands.get((model, plane), [])]
        if not options:
            return ZERO_MV
        if len(options) == 1:
            return MotionVector(*options[0])
        # each option is its own predictor, so only the distortion differs
        sads = ev.sad(model, plane, options)
        i = min(range(len(options)), key=lambda k: (sads[k], k))
        return MotionVector(*options[i])

    results = []
    if mode in ("translational", "both"):
        start = pick_start(Model.TRANSLATIONAL, None)
        results.append(_Search(ev, Model.TRANSLATIONAL, None, start, cfg, lam).run())
    if mode in ("mpa", "both"):
        for plane in PLANES:
            start = pick_start(Model.MPA, plane)
            results.append(_Search(ev, Model.MPA, plane, start, cfg, lam).run())
    return _finish(min(results, key=BlockDecision.sort_key), ev)


def tile_blocks(width: int, height: int, size: int = 16) -> list[BlockSpec]:
    """Raster-order grid of ``size`` x ``size`` blocks covering the frame."""
    if width % size or height % size:
        raise ValueError(f"{width}x{height} frame is not tiled by {size}x{size} blocks")
    return [BlockSpec(x, y, size, size) for y in range(0, height, size) for x in range(0, width, size)]


def _thread_count() -> int:
    cap = os.environ.get("MPA360_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return n


@dataclass
class FrameResult:
    prediction: Frame
    decisions: list[BlockDecision]
    report: dict = field(default_factory=dict)


def predict_frame(cur: Frame, ref: Frame, block_grid: Sequence[BlockSpec], cfg: SearchConfig,
                  erp: ErpFormat, persp: PerspectiveFormat, mode: str = "both") -> FrameResult:
    """Decide and predict every block of ``block_grid``.

    Blocks are processed in raster order so that left / top neighbours
    are available for MVP seeding.  Without seeding, blocks are searched
    concurrently (``MPA360_THREADS`` caps the worker count).
    """
    check_same_geometry(cur, ref)
    if sum(b.width * b.height for b in block_grid) != cur.width * cur.height:
        raise ValueError("block grid does not tile the frame")
    grid = sorted(block_grid, key=lambda b: (b.y, b.x))
    if cfg.mvp:
        done: dict[tuple[int, int], BlockDecision] = {}
        decisions = []
        for b in grid:
            nbs = [
                done[k]
                for k in ((b.x - b.width, b.y), (b.x, b.y - b.height),
                          (b.x + b.width, b.y - b.height), (b.x - b.width, b.y - b.height))
                if k in done
            ]
            d = decide_block(cur, ref, b, nbs, cfg, erp, persp, mode)
            done[(b.x, b.y)] = d
            decisions.append(d)
    else:
        def work(b):
            return decide_block(cur, ref, b, (), cfg, erp, persp, mode)

        workers = _thread_count()
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                decisions = list(pool.map(work, grid))
        else:
            decisions = [work(b) for b in grid]

    pred = np.zeros((cur.height, cur.width))
    fallbacks = 0
    for d in decisions:
        b = d.block
        fld = build_motion_field(b, d.mi, erp, persp, cfg.quant_step)
        fallbacks += fld.fallbacks
        pred[b.y : b.y + b.height, b.x : b.x + b.width] = predict_block(ref, b, fld)
    prediction = Frame.from_float(pred, cur.bit_depth)
    report = frame_report(cur, prediction, decisions, mode, cfg)
    report["grazing_fallbacks"] = fallbacks
    return FrameResult(prediction, decisions, report)


def utilization(decisions: Sequence[BlockDecision]) -> dict[str, float]:
    """Share of blocks (percent) per model / plane, plus zero-vector share."""
    n = max(len(decisions), 1)
    counts = {"translational": 0, **{p.label: 0 for p in PLANES}}
    zero = 0
    for d in decisions:
        key = "translational" if d.mi.model is Model.TRANSLATIONAL else MotionPlane(d.mi.plane).label
        counts[key] += 1
        zero += d.mi.mv == ZERO_MV
    out = {k: 100.0 * v / n for k, v in counts.items()}
    out["mpa"] = 100.0 - out["translational"]
    out["zero_mv"] = 100.0 * zero / n
    return out


def decision_record(d: BlockDecision) -> dict:
    plane = "" if d.mi.model is Model.TRANSLATIONAL else MotionPlane(d.mi.plane).label
    return {
        "x": d.block.x,
        "y": d.block.y,
        "width": d.block.width,
        "height": d.block.height,
        "model": "mpa" if d.mi.model is Model.MPA else "translational",
        "plane": plane,
        "du": d.mi.mv.du,
        "dv": d.mi.mv.dv,
        "cost": d.cost,
        "distortion": d.distortion,
        "rate_bits": d.rate_bits_proxy,
        "evaluations": d.evaluations,
    }


def frame_report(cur: Frame, prediction: Frame, decisions: Sequence[BlockDecision],
                 mode: str, cfg: SearchConfig) -> dict:
    diff = cur.data - prediction.data
    return {
        "schema": "mpa360.report/1",
        "mode": mode,
        "config": {
            "search_range": cfg.search_range,
            "fractional_refine": cfg.fractional_refine,
            "lambda": cfg.lam,
            "strategy": cfg.strategy,
            "mvp": cfg.mvp,
        },
        "blocks": len(decisions),
        "utilization": utilization(decisions),
        "psnr": psnr(cur, prediction),
        "ws_psnr": ws_psnr(cur, prediction),
        "sse": float((diff * diff).sum()),
        "total_cost": float(sum(d.cost for d in decisions)),
        "evaluations": int(sum(d.evaluations for d in decisions)),
        "decisions": [decision_record(d) for d in decisions],
    }
