import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zvrd.errors import ConfigurationError, ContractError
from zvrd.video import (
    FixtureSpec,
    fixture_gt_flow,
    from_unit_range,
    make_fixture,
    square_disocclusion_mask,
    to_unit_range,
    validate_frame,
)


def test_static_fixture_frames_identical():
    vid = make_fixture(FixtureSpec("static", (32, 32), 4, seed=7))
    assert vid.shape == (4, 32, 32, 3)
    for i in range(1, 4):
        assert vid[i].tobytes() == vid[0].tobytes()


def test_translating_fixture_is_exact_shift():
    vid = make_fixture(FixtureSpec("translating-texture", (64, 64), 3, (2.0, 0.0), seed=0))
    np.testing.assert_array_equal(vid[1][:, 2:], vid[0][:, :-2])
    np.testing.assert_array_equal(vid[2][:, 4:], vid[0][:, :-4])


def test_fixture_determinism_bitwise():
    spec = FixtureSpec("moving-square", (64, 64), 8, (1.0, 1.0), seed=3)
    a = make_fixture(spec)
    b = make_fixture(spec)
    assert a.tobytes() == b.tobytes()


def test_subpixel_translation_interpolates():
    vid = make_fixture(FixtureSpec("translating-texture", (32, 32), 2, (0.5, 0.0), seed=5))
    expected = 0.5 * (vid[0][:, 1:-1] + vid[0][:, :-2])
    np.testing.assert_allclose(vid[1][:, 1:-1], expected, atol=1e-12)


def test_brightness_ramp_dims_over_time():
    vid = make_fixture(FixtureSpec("brightness-ramp", (16, 16), 4, (-0.2, 0.0), seed=2))
    means = [(f + 1).mean() for f in vid]
    assert means == sorted(means, reverse=True)
    assert means[0] > means[-1]


def test_fixture_gt_flow_constant():
    spec = FixtureSpec("translating-texture", (16, 16), 2, (2.0, -1.0), seed=0)
    flow = fixture_gt_flow(spec)
    assert flow.shape == (16, 16, 2)
    assert (flow[..., 0] == -2.0).all() and (flow[..., 1] == 1.0).all()


def test_disocclusion_oracle_band_location():
    spec = FixtureSpec("moving-square", (16, 16), 2, (2.0, 0.0), seed=0)
    dis = square_disocclusion_mask(spec, 1)
    # square side 4 at (2, 2) moving right by 2: a 4x2 strip is revealed
    assert dis.sum() == 8
    assert dis[2:6, 2:4].all()


@pytest.mark.parametrize(
    "spec",
    [
        FixtureSpec("static", (4, 4), 2),
        FixtureSpec("static", (32, 32), 1),
        FixtureSpec("translating-texture", (32, 32), 3, (9.0, 0.0)),
        FixtureSpec("unknown-kind", (32, 32), 3),
    ],
)
def test_invalid_fixture_specs_rejected(spec):
    with pytest.raises(ConfigurationError):
        make_fixture(spec)


def test_unit_range_endpoints():
    assert to_unit_range(np.uint8(0)) == -1.0
    assert to_unit_range(np.uint8(255)) == 1.0


def test_unit_range_midpoint_value():
    # 128 / 127.5 - 1 computed independently
    expected = 128.0 / 127.5 - 1.0
    assert to_unit_range(np.uint8(128)) == pytest.approx(expected, abs=1e-15)
    assert expected == pytest.approx(0.00392156862745097, abs=1e-15)


def test_unit_range_roundtrip_exhaustive():
    values = np.arange(256, dtype=np.uint8).reshape(16, 16, 1)
    np.testing.assert_array_equal(from_unit_range(to_unit_range(values)), values)


def test_from_unit_range_clamps():
    out = from_unit_range(np.array([[[-2.0, 2.0, 0.0]]]))
    assert out[0, 0, 0] == 0 and out[0, 0, 1] == 255


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=255))
def test_unit_range_roundtrip_property(v):
    arr = np.full((2, 2, 3), v, dtype=np.uint8)
    assert (from_unit_range(to_unit_range(arr)) == arr).all()


def test_validate_frame_rejects_nan():
    bad = np.zeros((4, 4, 3))
    bad[0, 0, 0] = np.nan
    with pytest.raises(ContractError):
        validate_frame(bad)
    with pytest.raises(ContractError):
        validate_frame(np.zeros((4, 4, 2)))
