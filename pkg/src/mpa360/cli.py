"""Command-line front end: ``mpa360 {project,predict,estimate,metrics,synth}``.

Every subcommand accepts ``--config FILE.json`` whose keys are the long
option names (``search-range`` or ``search_range``); flags given on the
command line win over the file.  Failures exit with status 1 (2 for
usage errors) and print ``{"error": <class>, "message": ...}`` to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import Mpa360Error, UsageError
from .estimation import MODES, SearchConfig, decision_record, predict_frame, tile_blocks
from .geometry import MotionPlane, plane_rotation, unrotate
from .metrics import DEFAULT_SPHERE_POINTS, psnr, s_psnr_nn, ws_psnr
from .motion import BlockSpec, Model, MotionInfo, build_motion_field, to_plane
from .projection import (
    ErpFormat,
    PerspectiveFormat,
    PerspectivePoint,
    erp_forward,
    erp_inverse,
    perspective_inverse,
)
from .sampling import Frame, check_same_geometry, predict_block, sample_at
from .synth import global_shift, ground_plane_pair, mpa_warp, texture
from .yuv import plane_map_image, read_yuv_luma, write_ppm, write_yuv_luma

log = logging.getLogger("mpa360")

DECISIONS_SCHEMA = "mpa360.decisions/1"
METRICS_SCHEMA = "mpa360.metrics/1"
DECISION_FIELDS = ("schema", "x", "y", "width", "height", "model", "plane", "du", "dv",
                   "cost", "distortion", "rate_bits", "evaluations")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _pair(text: str, kind=float) -> tuple:
    parts = text.replace("x", ",").split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    try:
        return kind(parts[0]), kind(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number in {text!r}") from None


def _int_pair(text: str) -> tuple:
    return _pair(text, int)


def _plane(text: str) -> MotionPlane:
    try:
        return MotionPlane.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _jsonable(obj):
    """Replace non-finite floats by strings so the output stays strict JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _emit_json(obj, path: str | None) -> None:
    text = json.dumps(_jsonable(obj), indent=2, allow_nan=False)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------- options


def _add_geometry(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("raster")
    g.add_argument("--width", type=int, help="ERP width U in samples")
    g.add_argument("--height", type=int, help="ERP height V in samples")
    g.add_argument("--bit-depth", type=int, default=8, choices=(8, 10))
    g.add_argument("--chroma", default="400", choices=("400", "420"),
                   help="stored colour format; only luma is used")
    g.add_argument("--focal", type=float, default=None,
                   help="focal length of the motion planes (default 1/tan(pi/V))")


def _add_search(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("search")
    g.add_argument("--mode", default="both", choices=MODES)
    g.add_argument("--block-size", type=int, default=16)
    g.add_argument("--search-range", type=int, default=8)
    g.add_argument("--fractional-refine", default="off", choices=("off", "half", "quarter"))
    g.add_argument("--lambda", dest="lam", type=float, default=4.0,
                   help="rate weight for 8-bit SAD (scaled by 2^(bitdepth-8))")
    g.add_argument("--strategy", default="exhaustive", choices=("exhaustive", "diamond"))
    g.add_argument("--no-mvp", dest="mvp", action="store_false",
                   help="disable neighbour-based start vectors")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="mpa360", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    subs = {}

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="JSON file with option defaults")
        subs[name] = p
        return p

    p = add("project", "convert ERP points to plane coordinates, or render a viewport")
    _add_geometry(p)
    p.add_argument("--plane", type=_plane, default=MotionPlane.FRONT_BACK)
    p.add_argument("--points", help="CSV with columns u,v (use - for stdin)")
    p.add_argument("--input", help="ERP luma file to render a viewport from")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--view-size", type=_int_pair, default=(256, 256), help="W,H of the viewport")
    p.add_argument("--view-focal", type=float, default=None,
                   help="viewport focal length in viewport pixels (default: W/2, i.e. 90 deg)")
    p.add_argument("--out", help="output CSV or viewport luma file (default stdout for CSV)")
    p.set_defaults(func=cmd_project)

    p = add("predict", "apply a per-block motion map to a reference frame")
    _add_geometry(p)
    p.add_argument("--ref", help="reference luma file")
    p.add_argument("--ref-frame", type=int, default=0)
    p.add_argument("--motion", help="decision CSV as written by 'estimate'")
    p.add_argument("--cur", help="optional original frame for PSNR reporting")
    p.add_argument("--cur-frame", type=int, default=0)
    p.add_argument("--out", help="predicted luma file")
    p.set_defaults(func=cmd_predict)

    p = add("estimate", "choose a motion model per block and report utilization")
    _add_geometry(p)
    _add_search(p)
    p.add_argument("--input", help="sequence file; defaults to ref = frame 0, cur = frame 1")
    p.add_argument("--ref", help="reference luma file (overrides --input)")
    p.add_argument("--cur", help="current luma file (overrides --input)")
    p.add_argument("--ref-frame", type=int, default=None)
    p.add_argument("--cur-frame", type=int, default=None)
    p.add_argument("--decisions", help="per-block decision CSV")
    p.add_argument("--report", help="JSON report (default stdout)")
    p.add_argument("--plane-map", help="PPM image, red/green/blue = front-back/left-right/top-bottom")
    p.add_argument("--pred-out", help="predicted luma file")
    p.add_argument("--s-psnr", action="store_true", help="add S-PSNR-NN to the report")
    p.set_defaults(func=cmd_estimate)

    p = add("metrics", "compare two luma frames")
    _add_geometry(p)
    p.add_argument("--a", dest="a", help="first luma file")
    p.add_argument("--b", dest="b", help="second luma file")
    p.add_argument("--a-frame", type=int, default=0)
    p.add_argument("--b-frame", type=int, default=0)
    p.add_argument("--s-psnr-points", type=int, default=DEFAULT_SPHERE_POINTS)
    p.add_argument("--no-s-psnr", dest="s_psnr", action="store_false")
    p.add_argument("--out", help="JSON output (default stdout)")
    p.set_defaults(func=cmd_metrics)

    p = add("synth", "generate a two-frame sequence (ref, cur) with planted motion")
    _add_geometry(p)
    p.add_argument("--kind", default="shift", choices=("shift", "mpa", "ground"))
    p.add_argument("--t", type=_pair, default=(5.0, 0.0),
                   help="shift (integer pixels) or plane translation du,dv")
    p.add_argument("--plane", type=_plane, default=MotionPlane.FRONT_BACK)
    p.add_argument("--move", type=_pair, default=(0.05, 0.03),
                   help="ground kind: camera displacement dx,dy in camera heights")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output sequence file")
    p.set_defaults(func=cmd_synth)
    return parser, subs


def parse_args(argv=None) -> argparse.Namespace:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError(f"{args.config}: top level must be an object")
        sp = subs[args.command]
        known = {a.dest: a for a in sp._actions}
        defaults = {}
        for key, value in cfg.items():
            dest = key.replace("-", "_")
            dest = "lam" if dest == "lambda" else dest
            if dest not in known or dest in ("help", "config"):
                raise UsageError(f"{args.config}: unknown option {key!r}")
            action = known[dest]
            try:
                if action.type is not None and isinstance(value, str):
                    value = action.type(value)
                elif action.type in (_pair, _int_pair) and isinstance(value, list):
                    value = tuple(value)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"{args.config}: option {key!r}: {exc}") from None
            defaults[dest] = value
        sp.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


# ---------------------------------------------------------------- helpers


def _need(args, *names) -> None:
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"{args.command}: missing required option(s) {flags}")


def _formats(args) -> tuple[ErpFormat, PerspectiveFormat]:
    erp = ErpFormat(args.width, args.height)
    f = args.focal if args.focal is not None else erp.default_focal_length
    return erp, PerspectiveFormat(f)


def _read(args, path, index) -> Frame:
    return read_yuv_luma(path, args.width, args.height, args.bit_depth, index, args.chroma)


def write_decisions(path, decisions) -> None:
    rows = sorted((decision_record(d) for d in decisions), key=lambda r: (r["y"], r["x"]))
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=DECISION_FIELDS, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({"schema": DECISIONS_SCHEMA, **r})


def read_decisions(path) -> list[tuple[BlockSpec, MotionInfo]]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row.get("schema") != DECISIONS_SCHEMA:
                raise UsageError(f"{path}: unsupported schema {row.get('schema')!r}")
            block = BlockSpec(int(row["x"]), int(row["y"]), int(row["width"]), int(row["height"]))
            if row["model"] == "mpa":
                mi = MotionInfo(Model.MPA, (float(row["du"]), float(row["dv"])),
                                MotionPlane.parse(row["plane"]))
            elif row["model"] == "translational":
                mi = MotionInfo(Model.TRANSLATIONAL, (float(row["du"]), float(row["dv"])))
            else:
                raise UsageError(f"{path}: unknown model {row['model']!r}")
            out.append((block, mi))
    return out


def render_viewport(erp_frame: Frame, plane: MotionPlane, size: tuple[int, int],
                    view_focal: float) -> Frame:
    """Sample the real image plane of ``plane`` on a ``size`` pixel grid.

    Viewport column ``i`` and row ``j`` sit at plane coordinate
    ``(i - (W-1)/2, j - (H-1)/2)`` scaled by ``1/view_focal``.
    """
    w, h = size
    jj, ii = np.mgrid[0:h, 0:w].astype(np.float64)
    coord = np.stack([(ii - (w - 1) / 2.0) / view_focal, (jj - (h - 1) / 2.0) / view_focal], axis=-1)
    s = perspective_inverse(PerspectivePoint(coord, 0), PerspectiveFormat(1.0))
    s = unrotate(plane_rotation(plane), s)
    p = erp_forward(s, ErpFormat(erp_frame.width, erp_frame.height))
    return Frame.from_float(sample_at(erp_frame, p), erp_frame.bit_depth)


# ---------------------------------------------------------------- commands


def cmd_project(args) -> int:
    if args.input:
        _need(args, "width", "height", "out")
        frame = _read(args, args.input, args.frame)
        vf = args.view_focal if args.view_focal is not None else args.view_size[0] / 2.0
        write_yuv_luma(args.out, render_viewport(frame, args.plane, args.view_size, vf))
        return 0
    _need(args, "width", "height", "points")
    erp, persp = _formats(args)
    fh = sys.stdin if args.points == "-" else open(args.points, newline="")
    with fh:
        pts = np.array([[float(r["u"]), float(r["v"])] for r in csv.DictReader(fh)]).reshape(-1, 2)
    s = erp_inverse(pts, erp)
    pp = to_plane(pts, args.plane, erp, persp, strict=False)
    b_vip = np.broadcast_to(np.asarray(pp.b_vip), pts.shape[:1])
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(["u", "v", "x", "y", "z", "plane", "pu", "pv", "b_vip"])
        for i in range(len(pts)):
            grazing = bool(np.isnan(pp.coord[i, 0]))
            w.writerow([*(repr(float(c)) for c in pts[i]), *(repr(float(c)) for c in s[i]),
                        args.plane.label,
                        "" if grazing else repr(float(pp.coord[i, 0])),
                        "" if grazing else repr(float(pp.coord[i, 1])),
                        "grazing" if grazing else int(b_vip[i])])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_predict(args) -> int:
    _need(args, "width", "height", "ref", "motion", "out")
    erp, persp = _formats(args)
    ref = _read(args, args.ref, args.ref_frame)
    pred = np.zeros((ref.height, ref.width))
    covered = np.zeros(pred.shape, dtype=bool)
    for block, mi in read_decisions(args.motion):
        if not block.fits(ref.width, ref.height):
            raise UsageError(f"block at ({block.x}, {block.y}) lies outside the frame")
        fld = build_motion_field(block, mi, erp, persp)
        pred[block.y : block.y + block.height, block.x : block.x + block.width] = predict_block(ref, block, fld)
        covered[block.y : block.y + block.height, block.x : block.x + block.width] = True
    if not covered.all():
        raise UsageError("motion map does not cover the frame")
    frame = Frame.from_float(pred, ref.bit_depth)
    write_yuv_luma(args.out, frame)
    if args.cur:
        cur = _read(args, args.cur, args.cur_frame)
        _emit_json({"schema": METRICS_SCHEMA, "psnr": psnr(cur, frame), "ws_psnr": ws_psnr(cur, frame)}, None)
    return 0


def cmd_estimate(args) -> int:
    _need(args, "width", "height")
    ref_path = args.ref or args.input
    cur_path = args.cur or args.input
    if not ref_path or not cur_path:
        raise UsageError("estimate: give --input or both --ref and --cur")
    ref_idx = args.ref_frame if args.ref_frame is not None else 0
    cur_idx = args.cur_frame if args.cur_frame is not None else (1 if cur_path == args.input and not args.cur else 0)
    erp, persp = _formats(args)
    ref = _read(args, ref_path, ref_idx)
    cur = _read(args, cur_path, cur_idx)
    check_same_geometry(cur, ref)
    cfg = SearchConfig(search_range=args.search_range, fractional_refine=args.fractional_refine,
                       lam=args.lam, strategy=args.strategy, mvp=args.mvp)
    grid = tile_blocks(cur.width, cur.height, args.block_size)
    log.info("estimating %d blocks, mode=%s", len(grid), args.mode)
    result = predict_frame(cur, ref, grid, cfg, erp, persp, args.mode)
    report = dict(result.report)
    report["focal_length"] = persp.focal_length
    report["polar_utilization"] = _polar_utilization(result.decisions, cur.height)
    if args.s_psnr:
        report["s_psnr_nn"] = s_psnr_nn(cur, result.prediction)
    if args.decisions:
        write_decisions(args.decisions, result.decisions)
        report.pop("decisions")
    if args.plane_map:
        write_ppm(args.plane_map, plane_map_image(cur.width, cur.height, result.decisions))
    if args.pred_out:
        write_yuv_luma(args.pred_out, result.prediction)
    _emit_json(report, args.report)
    return 0


def _polar_utilization(decisions, height: int) -> dict[str, float]:
    """MPA share among blocks whose centre lies in the top or bottom quarter."""
    polar = [d for d in decisions
             if d.block.y + d.block.height / 2 < height / 4
             or d.block.y + d.block.height / 2 > 3 * height / 4]
    n = len(polar)
    mpa = sum(d.mi.model is Model.MPA for d in polar)
    return {"blocks": n, "mpa": 100.0 * mpa / n if n else 0.0}


def cmd_metrics(args) -> int:
    _need(args, "width", "height", "a", "b")
    a = _read(args, args.a, args.a_frame)
    b = _read(args, args.b, args.b_frame)
    out = {"schema": METRICS_SCHEMA, "psnr": psnr(a, b), "ws_psnr": ws_psnr(a, b)}
    if args.s_psnr:
        out["s_psnr_nn"] = s_psnr_nn(a, b, args.s_psnr_points)
    _emit_json(out, args.out)
    return 0


def cmd_synth(args) -> int:
    _need(args, "width", "height", "out")
    if args.kind == "ground":
        ref, cur = ground_plane_pair(args.width, args.height, shift=args.move,
                                     seed=args.seed, bit_depth=args.bit_depth)
    else:
        ref = texture(args.width, args.height, seed=args.seed, bit_depth=args.bit_depth)
        if args.kind == "shift":
            du, dv = args.t
            if du != int(du) or dv != int(dv):
                raise UsageError("synth --kind shift needs an integer --t")
            cur = global_shift(ref, int(du), int(dv))
        else:
            _, persp = _formats(args)
            cur = mpa_warp(ref, args.plane, args.t, persp)
    write_yuv_luma(args.out, [ref, cur], chroma=args.chroma)
    return 0


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(json.dumps({"error": exc.error_class, "message": str(exc)}), file=sys.stderr)
        return 2
    except (Mpa360Error, ValueError, OSError) as exc:
        name = exc.error_class if isinstance(exc, Mpa360Error) else type(exc).__name__
        print(json.dumps({"error": name, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
