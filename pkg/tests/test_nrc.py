import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hazenrc.dcp import DarkChannelParams, dark_channel, estimate_airlight
from hazenrc.exceptions import DimensionMismatch, EmptyDarkSet, NoValidPixels
from hazenrc.nrc import (NrcParams, ReferenceSet, estimate_nrc, gamma_per_sp, gamma_pixelwise, normalized_depth,
                         select_dark_sps)
from hazenrc.superpixel import SuperpixelLabeling, segment
from hazenrc.synth import (HazeParams, add_noise, gamma_ground_truth, benchmark_grid,
                           reference_pair, synthesize)

from oracles import gamma_per_sp_bf, gamma_pixel_bf, random_labels, select_dark_sps_bf, synth_pixel

WHITE = np.ones(3)


def _const(v, shape=(4, 4)):
    return np.broadcast_to(np.asarray(v, float), shape + (3,)).copy()


# -- normalized depth --------------------------------------------------------

def test_nd_same_capture_is_zero(small_scene):
    _, _, (I1, A1, _, _) = small_scene
    nd, valid = normalized_depth(I1, A1, I1, A1)
    assert valid.any()
    assert (nd[valid] == 0).all()


def test_nd_scalar_example():
    rho, d = np.full((3, 3, 3), 0.2), np.full((3, 3), 2.0)
    I1 = synthesize(rho, d, HazeParams(WHITE, 0.5))
    I2 = synthesize(rho, d, HazeParams(WHITE, 1.5))
    nd, valid = normalized_depth(I1, WHITE, I2, WHITE)
    assert valid.all()
    np.testing.assert_allclose(nd, 2.0, atol=1e-6)


def test_nd_sky_pixel_invalid():
    rho = np.full((2, 2, 3), 0.3)
    rho[0, 0] = 1.0
    d = np.ones((2, 2))
    A = np.array([0.9, 0.8, 1.0])
    nd, valid = normalized_depth(synthesize(rho, d, HazeParams(A, 0.5)), A, synthesize(rho, d, HazeParams(A, 1.5)), A)
    assert not valid[0, 0] and valid[1, 1]
    assert nd[0, 0] == 0.0


# -- per-pixel gamma ---------------------------------------------------------

def test_gamma_fixed_points(small_scene):
    _, _, (I1, A1, I2, A2) = small_scene
    refs = ReferenceSet(I1, A1, I2, A2)
    g, v = gamma_pixelwise(refs, I1, A1)
    assert v.any() and (g[v] == 0).all()
    g, v = gamma_pixelwise(refs, I2, A2)
    assert v.any() and (g[v] == 1).all()


@pytest.mark.parametrize("a_idx", range(5))
def test_gamma_mid_grid_true_airlights(small_scene, a_idx):
    albedo, depth, (I1, A1, I2, A2) = small_scene
    At = benchmark_grid().airlights[a_idx]
    It = synthesize(albedo, depth, HazeParams(At, 1.0))
    g, v = gamma_pixelwise(ReferenceSet(I1, A1, I2, A2), It, At)
    assert v.mean() > 0.3
    np.testing.assert_allclose(g[v], 0.5, atol=1e-4)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=3, max_size=3),
       st.lists(st.floats(0.05, 1), min_size=9, max_size=9),
       st.floats(0.05, 3), st.floats(0.1, 1.0), st.floats(1.1, 2.5), st.floats(0.1, 2.5))
def test_gamma_pixel_matches_scalar_oracle(rho, airs, d, b1, b2, bt):
    a1, a2, at = airs[:3], airs[3:6], airs[6:]
    p1, p2, pt = synth_pixel(rho, a1, b1, d), synth_pixel(rho, a2, b2, d), synth_pixel(rho, at, bt, d)
    refs = ReferenceSet(np.array([[p1]]), a1, np.array([[p2]]), a2)
    g, v = gamma_pixelwise(refs, np.array([[pt]]), at, NrcParams(clamp_gamma=False))
    expect = gamma_pixel_bf(p1, a1, p2, a2, pt, at)
    if expect is None:
        assert not v[0, 0] and g[0, 0] == 0
    else:
        assert v[0, 0]
        assert g[0, 0] == pytest.approx(expect, rel=1e-12, abs=1e-12)
        # on valid noiseless pixels the closed form recovers the true value
        assert expect == pytest.approx((bt - b1) / (b2 - b1), abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.integers(1, 12), st.booleans())
def test_pixelwise_outputs_finite_and_guards_partition(seed, h, w, clamp):
    rng = np.random.default_rng(seed)
    imgs = [rng.choice([0.0, 0.5, 1.0], (h, w, 3)) if seed % 3 == 0 else rng.uniform(0, 1, (h, w, 3))
            for _ in range(3)]
    airs = [rng.uniform(0.05, 1.0, 3) for _ in range(3)]
    refs = ReferenceSet(imgs[0], airs[0], imgs[1], airs[1])
    g, v = gamma_pixelwise(refs, imgs[2], airs[2], NrcParams(clamp_gamma=clamp))
    assert np.isfinite(g).all()
    assert (g[~v] == 0).all()
    if clamp:
        assert ((0 <= g) & (g <= 1)).all()
    lab = SuperpixelLabeling.from_labels(np.zeros((h, w), int))
    try:
        rep = estimate_nrc(refs, imgs[2], airs[2], lab, NrcParams(dark_threshold=1.0, clamp_gamma=clamp))
    except NoValidPixels:
        assert not v.any()
        return
    d = rep.diagnostics
    assert d["valid"] + d["near_airlight"] + d["log_domain"] + d["flat_denominator"] == h * w
    assert np.isfinite(rep.gamma_dot)


def test_guard_diagnostics_counts():
    # I = A everywhere except one ordinary pixel
    A = np.array([0.9, 0.9, 0.9])
    I1 = _const(A, (2, 2))
    I1[1, 1] = 0.5
    I2 = I1.copy()
    I2[1, 1] = 0.7
    refs = ReferenceSet(I1, A, I2, A)
    g, v = gamma_pixelwise(refs, I1, A)
    assert v.sum() == 1 and np.isfinite(g).all()
    lab = SuperpixelLabeling.from_labels(np.zeros((2, 2), int))
    rep = estimate_nrc(refs, I1, A, lab, NrcParams(dark_threshold=1.0))
    assert rep.diagnostics["near_airlight"] == 3
    assert rep.diagnostics["valid"] == 1


def test_log_domain_guard():
    A = np.array([0.5, 0.5, 0.5])
    I1, I2 = _const(0.2, (1, 1)), _const(0.8, (1, 1))  # opposite sides of the airlight
    g, v = gamma_pixelwise(ReferenceSet(I1, A, I2, A), _const(0.3, (1, 1)), A)
    assert not v[0, 0] and g[0, 0] == 0


def test_flat_denominator_guard():
    A = np.array([0.9, 0.9, 0.9])
    I = _const(0.3, (1, 1))
    lab = SuperpixelLabeling.from_labels(np.zeros((1, 1), int))
    with pytest.raises(NoValidPixels):
        estimate_nrc(ReferenceSet(I, A, I, A), I, A, lab)


def test_shape_mismatch():
    refs = ReferenceSet(_const(0.3), WHITE, _const(0.4), WHITE)
    with pytest.raises(DimensionMismatch):
        gamma_pixelwise(refs, _const(0.3, (3, 3)), WHITE)
    with pytest.raises(DimensionMismatch):
        ReferenceSet(_const(0.3), WHITE, _const(0.4, (3, 4)), WHITE)


# -- per-superpixel pooling and dark selection -------------------------------

def test_gamma_per_sp_examples():
    lab = SuperpixelLabeling.from_labels(np.array([[0, 0, 0, 1, 1, 1, 1, 1, 2]]))
    gamma = np.array([[0.4, 0.5, 0.6, 0.5, 0.5, 0.5, 0.5, 3.0, 0.9]])
    mask = np.ones_like(gamma, bool)
    mask[0, 8] = False
    sp = gamma_per_sp(gamma, mask, lab)
    assert sp.index.tolist() == [0, 1]
    assert sp.gamma.tolist() == [0.5, 0.5]
    assert sp.valid_count.tolist() == [3, 5]


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 16), st.integers(1, 16))
def test_gamma_per_sp_matches_brute_force(seed, h, w):
    rng = np.random.default_rng(seed)
    labels = random_labels(rng, h, w)
    gamma, mask = rng.uniform(-0.5, 1.5, (h, w)), rng.random((h, w)) < 0.7
    sp = gamma_per_sp(gamma, mask, SuperpixelLabeling.from_labels(labels))
    expect = gamma_per_sp_bf(gamma, mask, labels)
    assert sp.index.tolist() == sorted(expect)
    assert {k: (g, c) for k, g, c in zip(sp.index.tolist(), sp.gamma.tolist(), sp.valid_count.tolist())} == expect


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 16), st.integers(1, 16), st.floats(0.05, 1.0))
def test_select_dark_sps_matches_brute_force(seed, h, w, z_n):
    rng = np.random.default_rng(seed)
    labels = random_labels(rng, h, w)
    dc = rng.uniform(0, 1, (h, w))
    expect = select_dark_sps_bf(dc, labels, z_n)
    lab = SuperpixelLabeling.from_labels(labels)
    if expect:
        assert select_dark_sps(dc, lab, z_n).tolist() == expect
    else:
        with pytest.raises(EmptyDarkSet):
            select_dark_sps(dc, lab, z_n)


def test_select_all_and_none(rng):
    lab = SuperpixelLabeling.from_labels(random_labels(rng, 8, 8))
    assert select_dark_sps(rng.uniform(0, 1, (8, 8)), lab, 1.0).tolist() == list(range(lab.n_sp))
    white = dark_channel(np.ones((8, 8, 3)))
    with pytest.raises(EmptyDarkSet):
        select_dark_sps(white, lab, 0.1)


def test_select_known_dark_patches():
    # 4 x 4 blocks of 8 x 8 pixels; blocks on the anti-diagonal are dark
    labels = (np.arange(32)[:, None] // 8) * 4 + np.arange(32)[None, :] // 8
    albedo = np.full((32, 32, 3), 0.7)
    dark_blocks = {3, 6, 9, 12}
    for k in dark_blocks:
        albedo[labels == k] = 0.02
    depth = np.full((32, 32), 0.5)
    It = synthesize(albedo, depth, HazeParams(benchmark_grid().airlights[1], 0.5))
    dc = dark_channel(It, DarkChannelParams(1))
    lab = SuperpixelLabeling.from_labels(labels)
    got = select_dark_sps(dc, lab, 0.3).tolist()
    assert got == select_dark_sps_bf(dc, labels, 0.3)
    assert set(got) == dark_blocks


# -- whole-image estimate ----------------------------------------------------

def test_estimate_fixed_points(small_scene, small_labeling):
    _, _, (I1, A1, I2, A2) = small_scene
    refs = ReferenceSet(I1, A1, I2, A2)
    assert estimate_nrc(refs, I1, A1, small_labeling).gamma_dot == 0.0
    assert estimate_nrc(refs, I2, A2, small_labeling).gamma_dot == pytest.approx(1.0, abs=1e-12)


def test_estimate_beta_08_estimated_airlights(road_scene):
    albedo, depth = road_scene
    I1, _, I2, _ = reference_pair(albedo, depth)
    refs = ReferenceSet(I1, estimate_airlight(I1), I2, estimate_airlight(I2))
    lab = segment(I1)
    for airlight in benchmark_grid().airlights:
        It = synthesize(albedo, depth, HazeParams(airlight, 0.8))
        rep = estimate_nrc(refs, It, estimate_airlight(It), lab)
        assert rep.gamma_dot == pytest.approx(0.3, abs=0.05)


def test_selection_off_overestimates_light_haze(road_scene):
    albedo, depth = road_scene
    I1, _, I2, _ = reference_pair(albedo, depth)
    I1, I2 = add_noise(I1, 0.01, 1), add_noise(I2, 0.01, 2)
    refs = ReferenceSet(I1, estimate_airlight(I1), I2, estimate_airlight(I2))
    lab = segment(I1)
    for i, airlight in enumerate(benchmark_grid().airlights):
        It = add_noise(synthesize(albedo, depth, HazeParams(airlight, 0.6)), 0.01, 10 + i)
        At = estimate_airlight(It)
        on = estimate_nrc(refs, It, At, lab).gamma_dot
        off = estimate_nrc(refs, It, At, lab, NrcParams(dark_threshold=1.0)).gamma_dot
        assert off > on
        assert off > gamma_ground_truth(0.6)


def test_report_outputs(small_scene, small_labeling):
    albedo, depth, (I1, A1, I2, A2) = small_scene
    It = synthesize(albedo, depth, HazeParams(benchmark_grid().airlights[2], 1.1))
    rep = estimate_nrc(ReferenceSet(I1, A1, I2, A2), It, benchmark_grid().airlights[2], small_labeling)
    assert rep.gamma_dot == pytest.approx(0.6, abs=1e-6)
    rows = list(rep.rows())
    assert len(rows) == small_labeling.n_sp
    assert sum(r["selected"] for r in rows) == len(rep.dark_set)
    text = rep.to_csv()
    assert text.splitlines()[0] == "k,gamma_k,Z_k,selected,valid_count"
    assert "gamma_dot=0.6" in rep.summary()
    assert np.isfinite(rep.gamma_map).all()


def test_params_validation():
    with pytest.raises(ValueError):
        NrcParams(dark_threshold=0.0)
    with pytest.raises(ValueError):
        NrcParams(eps_num=0.0)


def test_unclamped_reports_out_of_range(small_scene, small_labeling):
    albedo, depth, (I1, A1, I2, A2) = small_scene
    It = synthesize(albedo, depth, HazeParams(A2, 1.8))
    refs = ReferenceSet(I1, A1, I2, A2)
    raw = estimate_nrc(refs, It, A2, small_labeling, NrcParams(clamp_gamma=False))
    assert raw.gamma_dot == pytest.approx(1.3, abs=1e-6) and raw.out_of_range
    clamped = estimate_nrc(refs, It, A2, small_labeling)
    assert clamped.gamma_dot == 1.0 and clamped.gamma_dot_raw == pytest.approx(1.3, abs=1e-6)


def test_nd_partial_sky_channel_still_valid():
    rho = np.array([[[0.3, 1.0, 0.5]]])
    d = np.full((1, 1), 1.5)
    A = np.array([0.8, 0.9, 1.0])
    nd, valid = normalized_depth(synthesize(rho, d, HazeParams(A, 0.5)), A, synthesize(rho, d, HazeParams(A, 1.5)), A)
    assert valid[0, 0]
    assert nd[0, 0] == pytest.approx(1.5, rel=1e-9)


def test_channel_consistency(small_scene):
    albedo, depth, _ = small_scene
    A = np.array([0.7, 0.8, 0.95])
    I1, I2, It = (synthesize(albedo, depth, HazeParams(A, b)) for b in (0.5, 1.5, 0.9))
    per_channel = []
    for c in range(3):
        def mono(img):
            return np.repeat(img[..., c:c + 1], 3, axis=2)
        a = np.full(3, A[c])
        per_channel.append(gamma_pixelwise(ReferenceSet(mono(I1), a, mono(I2), a), mono(It), a,
                                           NrcParams(clamp_gamma=False)))
    both = per_channel[0][1] & per_channel[1][1] & per_channel[2][1]
    assert both.any()
    for g, _ in per_channel[1:]:
        np.testing.assert_allclose(g[both], per_channel[0][0][both], atol=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gamma_dot_invariant_to_relabeling(small_scene, small_labeling, seed):
    albedo, depth, (I1, A1, I2, A2) = small_scene
    rng = np.random.default_rng(seed)
    refs = ReferenceSet(I1, A1, I2, A2)
    It = np.clip(synthesize(albedo, depth, HazeParams(A1, 1.0)) + rng.normal(0, 0.01, I1.shape), 0, 1)
    perm = rng.permutation(small_labeling.n_sp)
    relabeled = SuperpixelLabeling.from_labels(perm[small_labeling.labels])
    a = estimate_nrc(refs, It, A1, small_labeling)
    b = estimate_nrc(refs, It, A1, relabeled)
    assert a.gamma_dot == b.gamma_dot
    assert sorted(perm[a.dark_set].tolist()) == b.dark_set.tolist()
