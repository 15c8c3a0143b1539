import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mpa360.errors import GrazingRay
from mpa360.projection import (
    ErpFormat,
    PerspectiveFormat,
    PerspectivePoint,
    default_focal_length,
    erp_forward,
    erp_inverse,
    perspective_forward,
    perspective_inverse,
)

import oracle

R2 = math.sqrt(0.5)


@pytest.mark.parametrize("s, uv", [((-1, 0, 0), (32, 16)), ((0, 0, 1), (0, 0)), ((0, 1, 0), (16, 16))])
def test_erp_forward(erp64, s, uv):
    np.testing.assert_allclose(erp_forward(s, erp64), uv, atol=1e-12)


def test_erp_inverse(erp64):
    np.testing.assert_allclose(erp_inverse((32, 16), erp64), (-1, 0, 0), atol=1e-15)
    np.testing.assert_allclose(erp_inverse((16, 16), erp64), (0, 1, 0), atol=1e-15)
    # oracle: (0, -0.7071067811865476, 0.7071067811865476)
    np.testing.assert_allclose(
        erp_inverse((48, 8), erp64), (0.0, -0.7071067811865476, 0.7071067811865476), atol=1e-15
    )


def test_erp_inverse_wraps_and_clamps(erp64):
    np.testing.assert_allclose(erp_inverse((32 + 64, 16), erp64), erp_inverse((32, 16), erp64))
    np.testing.assert_allclose(erp_inverse((-16, 16), erp64), erp_inverse((48, 16), erp64), atol=1e-15)
    np.testing.assert_allclose(erp_inverse((5, -3), erp64), (0, 0, 1), atol=1e-15)
    np.testing.assert_allclose(erp_inverse((5, 40), erp64)[2], -1.0)


def test_erp_forward_u_range(erp64):
    uv = erp_forward((1.0, -1e-17, 0.0), erp64)
    assert 0.0 <= uv[0] < 64


def test_erp_format_warns_on_aspect():
    with pytest.warns(UserWarning):
        ErpFormat(100, 20)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ErpFormat(64, 32)
    with pytest.raises(ValueError):
        ErpFormat(1, 1)


@pytest.mark.parametrize(
    "s, coord, b",
    [((-1, 0, 0), (0, 0), 0), ((-R2, R2, 0), (100, 0), 0), ((R2, R2, 0), (100, 0), 1)],
)
def test_perspective_forward(s, coord, b):
    pp = perspective_forward(s, PerspectiveFormat(100.0))
    np.testing.assert_allclose(pp.coord, coord, atol=1e-12)
    assert pp.b_vip == b


@pytest.mark.parametrize(
    "coord, b, s",
    [((0, 0), 0, (-1, 0, 0)), ((100, 0), 0, (-R2, R2, 0)), ((100, 0), 1, (R2, R2, 0))],
)
def test_perspective_inverse(coord, b, s):
    np.testing.assert_allclose(perspective_inverse(PerspectivePoint(coord, b), PerspectiveFormat(100.0)), s, atol=1e-15)


def test_grazing_ray_raises_and_nan_when_lenient():
    fmt = PerspectiveFormat(10.0)
    with pytest.raises(GrazingRay):
        perspective_forward((0.0, 1.0, 0.0), fmt)
    with pytest.raises(GrazingRay):
        perspective_forward((5e-10, 0.0, 1.0), fmt)
    pp = perspective_forward(np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]]), fmt, strict=False)
    assert np.isnan(pp.coord[0]).all()
    np.testing.assert_allclose(pp.coord[1], (0, 0))
    # just outside the band is fine
    perspective_forward((np.sin(2e-9), np.cos(2e-9), 0.0), fmt)


@pytest.mark.parametrize("V", [32, 1108])
def test_default_focal_length_matches_oracle(V):
    expected = float(oracle.focal(V))
    assert default_focal_length(ErpFormat(2 * V, V)) == pytest.approx(expected, rel=1e-14)


def test_default_focal_length_values():
    assert default_focal_length(ErpFormat(8, 4)) == pytest.approx(1.0, abs=1e-15)
    assert default_focal_length(ErpFormat(64, 32)) == pytest.approx(10.153170387608860, rel=1e-14)
    assert default_focal_length(ErpFormat(2216, 1108)) == pytest.approx(352.68640876698984, rel=1e-14)


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


vectors = st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: np.linalg.norm(v) > 1e-2)


@given(vectors)
def test_erp_round_trip(v):
    s = _unit(v)
    fmt = ErpFormat(64, 32)
    if abs(s[2]) > math.cos(1e-6):
        return
    np.testing.assert_allclose(erp_inverse(erp_forward(s, fmt), fmt), s, atol=1e-9)


@given(vectors, st.floats(0.5, 2000))
def test_perspective_round_trip(v, f):
    s = _unit(v)
    theta_p = math.acos(max(-1.0, min(1.0, -s[0])))
    if abs(theta_p - math.pi / 2) <= 1e-6:
        return
    fmt = PerspectiveFormat(f)
    pp = perspective_forward(s, fmt)
    assert pp.b_vip == int(s[0] > 0)
    np.testing.assert_allclose(perspective_inverse(pp, fmt), s, atol=1e-9)


def test_radius_monotone_on_real_plane():
    fmt = PerspectiveFormat(50.0)
    theta = np.linspace(1e-4, math.pi / 2 - 1e-4, 2000)
    phi = 0.7
    s = np.stack([-np.cos(theta), np.sin(theta) * np.cos(phi), -np.sin(theta) * np.sin(phi)], -1)
    pp = perspective_forward(s, fmt)
    r = np.hypot(pp.coord[:, 0], pp.coord[:, 1])
    assert (pp.b_vip == 0).all()
    assert np.all(np.diff(r) > 0)


def test_vectorized_matches_oracle():
    rng = np.random.default_rng(3)
    s = rng.standard_normal((50, 3))
    s /= np.linalg.norm(s, axis=1, keepdims=True)
    fmt = PerspectiveFormat(17.0)
    pp = perspective_forward(s, fmt)
    for i in range(len(s)):
        c, b = oracle.persp_fwd([oracle.mpf(x) for x in s[i]], oracle.mpf(17))
        assert b == pp.b_vip[i]
        np.testing.assert_allclose(pp.coord[i], oracle.as_float(c), rtol=1e-9, atol=1e-9)
