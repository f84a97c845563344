import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hazenrc.dcp import DarkChannelParams, airlight_candidates, dark_channel, estimate_airlight
from hazenrc.exceptions import EstimateIsZero
from hazenrc.imgcore import to_gray_min_channel
from hazenrc.synth import INDOOR_PRESETS, PRESETS, HazeParams, generate_scene, benchmark_grid, synthesize

from oracles import dark_channel_bf


def test_black_image():
    assert (dark_channel(np.zeros((6, 7, 3))) == 0).all()


def test_radius_zero_is_min_channel(rng):
    img = rng.uniform(0, 1, (5, 6, 3))
    np.testing.assert_array_equal(dark_channel(img, DarkChannelParams(0)), to_gray_min_channel(img))


def test_random_8x8_radius_1(rng):
    img = rng.uniform(0, 1, (8, 8, 3))
    np.testing.assert_array_equal(dark_channel(img, DarkChannelParams(1)), dark_channel_bf(img, 1))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 10), st.integers(1, 10), st.just(3)),
              elements=st.floats(0, 1)),
       st.integers(0, 4))
def test_matches_brute_force(img, r):
    np.testing.assert_array_equal(dark_channel(img, DarkChannelParams(r)), dark_channel_bf(img, r))


@given(arrays(np.float64, (6, 6, 3), elements=st.floats(0, 1)), st.integers(0, 3))
def test_dark_channel_bounded_by_min_channel(img, r):
    dc = dark_channel(img, DarkChannelParams(r))
    assert (dc <= img.min(axis=2)).all()
    assert (dark_channel(img, DarkChannelParams(r + 1)) <= dc).all()


def test_negative_radius_rejected():
    with pytest.raises(ValueError):
        DarkChannelParams(-1)


def test_constant_image_airlight():
    A = np.array([0.8, 0.9, 1.0])
    np.testing.assert_array_equal(estimate_airlight(np.broadcast_to(A, (10, 12, 3))), A)


def test_zero_airlight_raises():
    img = np.zeros((4, 4, 3))
    img[..., 1:] = 0.5
    with pytest.raises(EstimateIsZero):
        estimate_airlight(img)


def test_candidates_count_and_ties():
    dc = np.array([[0.5, 0.9, 0.9], [0.1, 0.9, 0.2]])
    assert airlight_candidates(dc, 0.001).tolist() == [1]
    assert airlight_candidates(dc, 0.5).tolist() == [1, 2, 4]
    with pytest.raises(ValueError):
        airlight_candidates(dc, 0.0)


@pytest.mark.parametrize("name", ["road", "church", "lawn"])
def test_sky_band_airlight_accuracy(name):
    spec, seed = PRESETS[name]
    albedo, depth = generate_scene(spec, seed)
    for airlight, beta in [(benchmark_grid().airlights[i], b) for i in range(5) for b in (0.5, 1.0, 1.5)]:
        img = synthesize(albedo, depth, HazeParams(airlight, beta))
        assert np.max(np.abs(estimate_airlight(img) - airlight)) <= 2 / 255


@pytest.mark.parametrize("name", INDOOR_PRESETS)
def test_indoor_airlight_underestimated(name):
    spec, seed = PRESETS[name]
    albedo, depth = generate_scene(spec, seed)
    assert albedo.max() <= 0.6
    for airlight in benchmark_grid().airlights:
        est = estimate_airlight(synthesize(albedo, depth, HazeParams(airlight, 1.0)))
        assert (est < airlight).all()
