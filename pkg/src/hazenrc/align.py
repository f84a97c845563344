"""Support for non-stationary cameras: integer translation + superpixel matching.

Shift convention: ``(dx, dy)`` means the test capture shows the scene moved
by ``dx`` pixels right and ``dy`` pixels down, i.e.
``test[y, x] == ref[y - dy, x - dx]``.
"""
import csv
import io
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy import signal

from .dcp import DarkChannelParams, dark_channel
from .exceptions import DegenerateImage, DimensionMismatch, NoMatchedSps
from .nrc import NrcParams, ReferenceSet, _assemble, _gamma_field, gamma_per_sp
from .superpixel import grouped_lower_median
from .validation import check_image, check_same_shape


def _overlap_sums(a, shifts, side):
    """Sum of ``a`` over the overlap window for every (dy, dx) in ``shifts``.

    ``side="test"`` sums ``a[y, x]`` over the test's part of the overlap,
    ``side="ref"`` sums ``a[y - dy, x - dx]``. Result has shape (S, S),
    indexed [dy, dx].
    """
    h, w = a.shape
    c = np.zeros((h + 1, w + 1))
    c[1:, 1:] = a.cumsum(0).cumsum(1)
    y0, y1 = np.maximum(0, shifts), np.minimum(h, h + shifts)
    x0, x1 = np.maximum(0, shifts), np.minimum(w, w + shifts)
    if side == "ref":
        y0, y1, x0, x1 = y0 - shifts, y1 - shifts, x0 - shifts, x1 - shifts
    return c[np.ix_(y1, x1)] - c[np.ix_(y0, x1)] - c[np.ix_(y1, x0)] + c[np.ix_(y0, x0)]


def shift_ncc(ref_gray, test_gray, dx, dy):
    """NCC between ``test[y, x]`` and ``ref[y - dy, x - dx]`` over their overlap."""
    h, w = ref_gray.shape
    t = test_gray[max(0, dy):min(h, h + dy), max(0, dx):min(w, w + dx)]
    r = ref_gray[max(0, -dy):min(h, h - dy), max(0, -dx):min(w, w - dx)]
    t = t - t.mean()
    r = r - r.mean()
    denom = np.sqrt((t * t).sum() * (r * r).sum())
    return float((t * r).sum() / denom) if denom > 0 else -np.inf


def global_align(ref, test, max_shift=32):
    """Integer translation of ``test`` relative to ``ref`` maximizing NCC.

    The score is computed on min-channel maps over the overlap region. Ties
    go to the smaller shift norm, then row-major (dy, dx) order.
    """
    ref = check_image(ref, "ref")
    test = check_image(test, "test")
    check_same_shape(ref, test, names=("ref", "test"))
    h, w = ref.shape[:2]
    if not 0 <= max_shift < min(h, w) / 4:
        raise ValueError(f"max_shift must lie in [0, {min(h, w) / 4}), got {max_shift}")
    a, b = ref.min(axis=2), test.min(axis=2)
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise DegenerateImage("cannot align a constant image")

    # screen all shifts with FFT correlation + box sums, then confirm directly
    s = max_shift
    full = signal.fftconvolve(b, a[::-1, ::-1], mode="full")
    sab = full[h - 1 - s:h + s, w - 1 - s:w + s]
    shifts = np.arange(-s, s + 1)
    n = np.outer(h - np.abs(shifts), w - np.abs(shifts)).astype(np.float64)
    sa = _overlap_sums(a, shifts, "ref")
    saa = _overlap_sums(a * a, shifts, "ref")
    sb = _overlap_sums(b, shifts, "test")
    sbb = _overlap_sums(b * b, shifts, "test")
    cov = sab - sa * sb / n
    var = (saa - sa * sa / n) * (sbb - sb * sb / n)
    with np.errstate(divide="ignore", invalid="ignore"):
        ncc = np.where(var > 1e-18, cov / np.sqrt(np.maximum(var, 1e-300)), -np.inf)
    if not np.isfinite(ncc).any():
        raise DegenerateImage("no shift has a textured overlap")
    top = np.argwhere(ncc >= np.nanmax(ncc) - 1e-6)
    best = None
    for iy, ix in top:
        dy, dx = int(shifts[iy]), int(shifts[ix])
        score = shift_ncc(a, b, dx, dy)
        key = (-score, dx * dx + dy * dy, dy, dx)
        if best is None or key < best[0]:
            best = (key, (dx, dy))
    return best[1]


def shift_image(img, dx, dy):
    """Content moved by (dx, dy); uncovered borders replicate the edge."""
    arr = np.asarray(img)
    h, w = arr.shape[:2]
    pad = [(max(dy, 0), max(-dy, 0)), (max(dx, 0), max(-dx, 0))] + [(0, 0)] * (arr.ndim - 2)
    padded = np.pad(arr, pad, mode="edge")
    y0, x0 = max(-dy, 0), max(-dx, 0)
    return padded[y0:y0 + h, x0:x0 + w]


@dataclass
class SpMatch:
    pairs: List[Tuple[int, int, float]]
    unmatched_ref: List[int]
    unmatched_test: List[int]
    centroid_dist: List[float] = field(default_factory=list)
    color_dist: List[float] = field(default_factory=list)

    def pair_set(self):
        return {(r, t) for r, t, _ in self.pairs}

    def to_csv(self, path=None):
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["k_ref", "k_test", "cost", "centroid_dist", "color_dist"])
        for (r, t, c), cd, col in zip(self.pairs, self.centroid_dist, self.color_dist):
            writer.writerow([r, t, repr(c), repr(cd), repr(col)])
        if path is None:
            return buf.getvalue()
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())


def _normalized_colors(labeling, offset):
    """Superpixel mean colours rescaled per channel to [0, 1].

    Haze acts roughly as a per-channel affine map on colours, so matching on
    raw means would fail between captures at different haze levels. The
    range is taken over superpixels whose centroid, moved by ``offset``,
    stays inside the frame, so both sides are normalized on shared content.
    """
    m = labeling.mean_rgb
    h, w = labeling.shape
    c = labeling.centroids + np.asarray(offset, dtype=np.float64)
    shared = (c[:, 0] >= 0) & (c[:, 0] <= w - 1) & (c[:, 1] >= 0) & (c[:, 1] <= h - 1)
    ref = m[shared] if shared.any() else m
    lo, hi = ref.min(axis=0), ref.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return (m - lo) / span


def match_superpixels(ref_lab, test_lab, shift, max_centroid_dist, max_color_dist=0.15):
    """Mutual-nearest-neighbour matching on shifted centroid + colour distance.

    cost = centroid_dist / max_centroid_dist + color_dist / max_color_dist;
    pairs must be mutual best matches with both distances under their caps.
    Pairs are listed by ascending cost.
    """
    dx, dy = shift
    pred = ref_lab.centroids + np.array([dx, dy], dtype=np.float64)
    cd = np.linalg.norm(test_lab.centroids[None, :, :] - pred[:, None, :], axis=2)
    ref_col = _normalized_colors(ref_lab, (dx, dy))
    test_col = _normalized_colors(test_lab, (-dx, -dy))
    col = np.linalg.norm(test_col[None, :, :] - ref_col[:, None, :], axis=2)
    cost = cd / max_centroid_dist + col / max_color_dist
    cost = np.where((cd <= max_centroid_dist) & (col <= max_color_dist), cost, np.inf)

    best_test = np.argmin(cost, axis=1)
    best_ref = np.argmin(cost, axis=0)
    found = []
    for r, t in enumerate(best_test):
        if np.isfinite(cost[r, t]) and best_ref[t] == r:
            found.append((float(cost[r, t]), r, int(t)))
    found.sort()
    matched_ref = {r for _, r, _ in found}
    matched_test = {t for _, _, t in found}
    return SpMatch(
        pairs=[(r, t, c) for c, r, t in found],
        unmatched_ref=[k for k in range(ref_lab.n_sp) if k not in matched_ref],
        unmatched_test=[k for k in range(test_lab.n_sp) if k not in matched_test],
        centroid_dist=[float(cd[r, t]) for _, r, t in found],
        color_dist=[float(col[r, t]) for _, r, t in found],
    )


def identity_match(labeling):
    """Every superpixel matched to itself at zero cost."""
    n = labeling.n_sp
    return SpMatch([(k, k, 0.0) for k in range(n)], [], [], [0.0] * n, [0.0] * n)


def estimate_nrc_matched(refs, It, At, match, test_labeling, shift=(0, 0),
                         params=NrcParams(), dc_params=DarkChannelParams()):
    """Whole-image NRC restricted to matched superpixels.

    Per-pixel gammas use the test superpixel's own pixels, with the
    references sampled at the shifted coordinates; pixels whose reference
    position falls outside the frame are skipped.
    """
    if not match.pairs:
        raise NoMatchedSps("superpixel matching produced no pairs")
    It = check_image(It, "It")
    check_same_shape(refs.I1, It, names=("references", "It"))
    if test_labeling.shape != It.shape[:2]:
        raise DimensionMismatch("test labeling does not match It")
    dx, dy = shift
    h, w = It.shape[:2]
    yy, xx = np.indices((h, w))
    inside = (yy - dy >= 0) & (yy - dy < h) & (xx - dx >= 0) & (xx - dx < w)
    warped = ReferenceSet(shift_image(refs.I1, dx, dy), refs.A1, shift_image(refs.I2, dx, dy), refs.A2)
    field_ = _gamma_field(warped, It, At, params)
    valid = field_.valid & inside
    field_ = field_._replace(valid=valid,
                             gamma=np.where(valid, field_.gamma, 0.0),
                             raw=np.where(valid, field_.raw, 0.0))
    diagnostics = dict(field_.diagnostics, valid=int(valid.sum()), outside_reference=int((~inside).sum()))

    matched = np.array(sorted({t for _, t, _ in match.pairs}))
    sp = gamma_per_sp(field_.gamma, valid, test_labeling)
    sp_raw = gamma_per_sp(field_.raw, valid, test_labeling).gamma
    keep = np.isin(sp.index, matched)
    sp = type(sp)(sp.index[keep], sp.gamma[keep], sp.valid_count[keep])
    sp_raw = sp_raw[keep]
    if sp.index.size == 0:
        raise NoMatchedSps("no matched superpixel has a valid pixel")
    dark_medians, _ = grouped_lower_median(dark_channel(It, dc_params), test_labeling.labels, test_labeling.n_sp)
    dark = np.flatnonzero(dark_medians <= params.dark_threshold)
    if dark.size and not np.isin(sp.index, dark).any():
        raise NoMatchedSps("no matched superpixel is dark")
    diagnostics["matched_sps"] = int(matched.size)
    return _assemble(field_, sp, sp_raw, dark_medians, params.dark_threshold, params.clamp_gamma, diagnostics)
