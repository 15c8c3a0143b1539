import numpy as np
import pytest

from mpa360 import estimation as est
from mpa360.estimation import (
    BlockDecision,
    SearchConfig,
    decide_block,
    mvp_candidates,
    model_bits,
    mvd_bits,
    predict_frame,
    se_golomb_bits,
    search_mpa,
    search_translational,
    tile_blocks,
)
from mpa360.geometry import MotionPlane
from mpa360.motion import BlockSpec, Model, MotionInfo, mpa_map
from mpa360.mvp import translate_mpa_to_translational
from mpa360.projection import ErpFormat, PerspectiveFormat
from mpa360.sampling import Frame
from mpa360.synth import global_shift, ground_plane_pair, mpa_warp, texture

ERP = ErpFormat(128, 64)
PERSP = PerspectiveFormat(ERP.default_focal_length)


def exp_golomb_signed(v):
    """Codeword string built from the definition."""
    k = 2 * v - 1 if v > 0 else -2 * v
    body = bin(k + 1)[2:]
    return "0" * (len(body) - 1) + body


@pytest.mark.parametrize("v", range(-40, 41))
def test_se_golomb_bits(v):
    assert se_golomb_bits(v) == len(exp_golomb_signed(v))


def test_rate_proxy_pieces():
    assert mvd_bits((1.0, -0.25), (1.0, 0.0)) == 1 + 3
    assert model_bits(Model.TRANSLATIONAL) == 1
    assert model_bits(Model.MPA, MotionPlane.FRONT_BACK) == 2
    assert model_bits(Model.MPA, MotionPlane.LEFT_RIGHT) == 3
    assert model_bits(Model.MPA, MotionPlane.TOP_BOTTOM) == 3


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(search_range=0)
    with pytest.raises(ValueError):
        SearchConfig(lam=-1)
    with pytest.raises(ValueError):
        SearchConfig(strategy="tz")
    assert SearchConfig().lambda_for(10) == 16.0


@pytest.fixture(scope="module")
def tex():
    return texture(64, 32, seed=4)


def test_identical_frames(tex):
    d = search_translational(tex, tex, BlockSpec(16, 8, 16, 16), cfg=SearchConfig(search_range=4))
    assert d.mi.mv == (0, 0) and d.distortion == 0
    assert d.cost == pytest.approx(d.distortion + 4.0 * d.rate_bits_proxy)


@pytest.mark.parametrize("shift", [(5, 0), (-3, 2)])
def test_planted_shift(tex, shift):
    # cur(p) = ref(p + shift)
    ref = Frame(np.roll(tex.samples, (shift[1], shift[0]), axis=(0, 1)))
    cfg = SearchConfig(search_range=6, lam=0.0)
    d = search_translational(tex, ref, BlockSpec(16, 8, 16, 16), cfg=cfg)
    assert d.mi.mv == shift and d.distortion == 0


def test_exhaustive_global_optimum_brute_force():
    rng = np.random.default_rng(9)
    cur = Frame(rng.integers(0, 256, (32, 64)))
    ref = Frame(rng.integers(0, 256, (32, 64)))
    block = BlockSpec(24, 8, 8, 8)
    rng_ = 3
    best = None
    for dv in range(-rng_, rng_ + 1):
        for du in range(-rng_, rng_ + 1):
            rows = np.clip(np.arange(8, 16) + dv, 0, 31)
            cols = np.mod(np.arange(24, 32) + du, 64)
            sad = np.abs(cur.samples[8:16, 24:32].astype(int) - ref.samples[np.ix_(rows, cols)].astype(int)).sum()
            best = sad if best is None else min(best, sad)
    d = search_translational(cur, ref, block, cfg=SearchConfig(search_range=rng_, lam=0.0))
    assert d.distortion == best
    assert d.evaluations == (2 * rng_ + 1) ** 2


def test_fractional_refinement_finds_half_pel():
    vv, uu = np.mgrid[0:32, 0:64]
    # distinct ramp slopes so that no vertical shift mimics a horizontal one
    ref = Frame(np.clip(3 * uu + 7 * vv, 0, 255))
    cur = Frame(np.clip(3 * (uu + 1) + 7 * vv, 0, 255))
    block = BlockSpec(16, 8, 8, 8)
    d = search_translational(cur, ref, block, cfg=SearchConfig(search_range=2, lam=0.0, fractional_refine="quarter"))
    assert d.mi.mv == (1.0, 0.0)
    cur2 = Frame.from_float(np.clip(2 * (uu + 0.5) + 7 * vv, 0, 255))
    ref2 = Frame(np.clip(2 * uu + 7 * vv, 0, 255))
    d2 = search_translational(cur2, ref2, block, cfg=SearchConfig(search_range=2, lam=0.0, fractional_refine="half"))
    assert d2.mi.mv == (0.5, 0.0) and d2.distortion == 0


def test_diamond_reaches_planted_shift(tex):
    ref = Frame(np.roll(tex.samples, (0, 3), axis=(0, 1)))
    cfg = SearchConfig(search_range=6, lam=0.0, strategy="diamond")
    d = search_translational(tex, ref, BlockSpec(16, 8, 16, 16), cfg=cfg)
    assert d.mi.mv == (3, 0)
    assert d.evaluations < 13 * 13


def test_mpa_search_on_identical_frames(tex):
    erp, persp = ErpFormat(64, 32), PerspectiveFormat(ErpFormat(64, 32).default_focal_length)
    block = BlockSpec(32, 0, 16, 16)
    d = search_mpa(tex, tex, block, None, SearchConfig(search_range=2), erp, persp)
    assert d.mi.model is Model.MPA and d.mi.mv == (0, 0) and d.distortion == 0
    both = decide_block(tex, tex, block, [], SearchConfig(search_range=2, lam=1.0), erp, persp)
    assert both.mi.model is Model.TRANSLATIONAL


@pytest.fixture(scope="module")
def planted_tb():
    ref = texture(128, 64, seed=7)
    return ref, mpa_warp(ref, MotionPlane.TOP_BOTTOM, (3, -2), PERSP)


def test_planted_mpa_recovery_small(planted_tb):
    ref, cur = planted_tb
    cfg = SearchConfig(search_range=4, lam=0.0)
    for block in tile_blocks(128, 64, 16):
        if block.y + block.height > 16:
            continue
        d = search_mpa(cur, ref, block, None, cfg, ERP, PERSP)
        assert d.mi.plane is MotionPlane.TOP_BOTTOM and d.mi.mv == (3, -2)
        t = search_translational(cur, ref, block, cfg=cfg)
        assert t.distortion > d.distortion


def test_neighbor_seeds_translational_start_via_mvp(planted_tb, monkeypatch):
    ref, cur = planted_tb
    calls = []
    real = est.translate_mpa_to_translational

    def spy(*args, **kwargs):
        calls.append(args)
        return real(*args, **kwargs)

    monkeypatch.setattr(est, "translate_mpa_to_translational", spy)
    left = BlockSpec(16, 0, 16, 16)
    nb = BlockDecision(MotionInfo(Model.MPA, (3, -2), MotionPlane.TOP_BOTTOM), 0.0, 0.0, 0.0, left)
    block = BlockSpec(32, 0, 16, 16)
    cands = est.mvp_candidates(block, [nb], ERP, PERSP)
    assert len(calls) == 1
    anchor, t_s, plane = calls[0][:3]
    np.testing.assert_array_equal(anchor, (31, 7))
    assert tuple(t_s) == (3, -2) and plane is MotionPlane.TOP_BOTTOM
    expected = translate_mpa_to_translational((31, 7), (3, -2), MotionPlane.TOP_BOTTOM, ERP, PERSP, 0.25)
    assert cands[(Model.TRANSLATIONAL, None)] == [expected]
    assert cands[(Model.MPA, MotionPlane.TOP_BOTTOM)] == [(3.0, -2.0)]


def test_mvp_candidates_are_eq17_consistent():
    block = BlockSpec(48, 16, 16, 16)
    nbs = [
        BlockDecision(MotionInfo(Model.MPA, (2.5, -1.0), MotionPlane.LEFT_RIGHT), 0, 0, 0, BlockSpec(32, 16, 16, 16)),
        BlockDecision(MotionInfo(Model.TRANSLATIONAL, (-1.75, 0.5)), 0, 0, 0, BlockSpec(48, 0, 16, 16)),
    ]
    from mpa360 import mvp

    cands = mvp_candidates(block, nbs, ERP, PERSP)
    for nb in nbs:
        anchor = est._neighbor_anchor(block, nb.block)
        src = mpa_map(anchor, nb.mi.mv, nb.mi.plane, ERP, PERSP) if nb.mi.model is Model.MPA else anchor + np.asarray(nb.mi.mv)
        for plane in MotionPlane:
            if nb.mi.model is Model.MPA:
                t = mvp.translate_plane_to_plane(anchor, nb.mi.mv, nb.mi.plane, plane, ERP, PERSP)
            else:
                t = mvp.translate_translational_to_mpa(anchor, nb.mi.mv, plane, ERP, PERSP)
            np.testing.assert_allclose(mpa_map(anchor, t, plane, ERP, PERSP), src, atol=1e-5)
            q = tuple(np.round(np.asarray(t) * 4) / 4)
            assert q in cands[(Model.MPA, plane)]


def test_decide_block_dominates_and_is_deterministic(planted_tb):
    ref, cur = planted_tb
    cfg = SearchConfig(search_range=4, lam=4.0, mvp=False)
    block = BlockSpec(64, 0, 16, 16)
    d1 = decide_block(cur, ref, block, [], cfg, ERP, PERSP)
    d2 = decide_block(cur, ref, block, [], cfg, ERP, PERSP)
    assert d1.mi == d2.mi and d1.cost == d2.cost
    t = search_translational(cur, ref, block, cfg=cfg)
    m = search_mpa(cur, ref, block, None, cfg, ERP, PERSP)
    assert d1.cost <= min(t.cost, m.cost)
    assert d1.cost == min(t.cost, m.cost)


def test_tie_breaking_prefers_translational(tex):
    erp = ErpFormat(64, 32)
    persp = PerspectiveFormat(erp.default_focal_length)
    d = decide_block(tex, tex, BlockSpec(0, 0, 16, 16), [], SearchConfig(search_range=1, lam=0.0), erp, persp)
    assert d.mi.model is Model.TRANSLATIONAL and d.mi.mv == (0, 0)
    m = search_mpa(tex, tex, BlockSpec(0, 0, 16, 16), None, SearchConfig(search_range=1, lam=0.0), erp, persp)
    assert m.mi.plane is MotionPlane.FRONT_BACK


def test_predict_frame_identity(tex):
    erp = ErpFormat(64, 32)
    persp = PerspectiveFormat(erp.default_focal_length)
    for mode in ("translational", "mpa", "both"):
        r = predict_frame(tex, tex, tile_blocks(64, 32, 16), SearchConfig(search_range=2), erp, persp, mode)
        assert r.report["psnr"] == float("inf")
        assert r.report["utilization"]["zero_mv"] == 100.0
        np.testing.assert_array_equal(r.prediction.samples, tex.samples)


def test_predict_frame_planted_global_shift(tex):
    cur = global_shift(tex, 5, 0)
    erp = ErpFormat(64, 32)
    r = predict_frame(cur, tex, tile_blocks(64, 32, 16), SearchConfig(search_range=6, lam=0.0),
                      erp, PerspectiveFormat(erp.default_focal_length), "translational")
    assert all(d.mi.mv == (5, 0) for d in r.decisions)
    assert r.report["psnr"] == float("inf")


def test_both_mode_dominates_single_modes(planted_tb):
    ref, cur = planted_tb
    cfg = SearchConfig(search_range=4, lam=4.0, mvp=False)
    grid = tile_blocks(128, 64, 16)
    res = {m: predict_frame(cur, ref, grid, cfg, ERP, PERSP, m) for m in ("translational", "mpa", "both")}
    for b, t, m in zip(*(res[k].decisions for k in ("both", "translational", "mpa"))):
        assert b.cost <= min(t.cost, m.cost)


def test_threads_do_not_change_results(planted_tb, monkeypatch):
    ref, cur = planted_tb
    cfg = SearchConfig(search_range=2, lam=4.0, mvp=False)
    grid = tile_blocks(128, 64, 16)
    monkeypatch.setenv("MPA360_THREADS", "1")
    one = predict_frame(cur, ref, grid, cfg, ERP, PERSP, "both")
    monkeypatch.setenv("MPA360_THREADS", "4")
    four = predict_frame(cur, ref, grid, cfg, ERP, PERSP, "both")
    assert [d.mi for d in one.decisions] == [d.mi for d in four.decisions]


def test_grid_must_tile():
    with pytest.raises(ValueError):
        tile_blocks(60, 32, 16)
    tex = texture(64, 32)
    with pytest.raises(ValueError):
        predict_frame(tex, tex, tile_blocks(64, 32, 16)[:-1], SearchConfig(), ERP, PERSP)


def test_ground_plane_mpa_beats_translational():
    ref, cur = ground_plane_pair(128, 64, shift=(0.06, 0.04))
    erp = ErpFormat(128, 64)
    persp = PerspectiveFormat(erp.default_focal_length)
    cfg = SearchConfig(search_range=6, lam=4.0, fractional_refine="quarter")
    grid = tile_blocks(128, 64, 16)
    t = predict_frame(cur, ref, grid, cfg, erp, persp, "translational")
    m = predict_frame(cur, ref, grid, cfg, erp, persp, "mpa")
    assert m.report["ws_psnr"] > t.report["ws_psnr"]


def test_mvp_seeding_reduces_diamond_evaluations(planted_tb):
    ref, cur = planted_tb
    grid = tile_blocks(128, 64, 16)
    off = predict_frame(cur, ref, grid, SearchConfig(search_range=8, lam=4.0, strategy="diamond", mvp=False), ERP, PERSP, "mpa")
    on = predict_frame(cur, ref, grid, SearchConfig(search_range=8, lam=4.0, strategy="diamond", mvp=True), ERP, PERSP, "mpa")
    assert on.report["evaluations"] < off.report["evaluations"]
