"""Normalized scattering coefficient (NRC) estimation.

Given two reference captures of a static scene, (I1, A1) at a lighter haze
level and (I2, A2) at a heavier one, the NRC of a test capture (It, At) is
``gamma = (beta_t - beta_1) / (beta_2 - beta_1)``. Per pixel it is obtained
without knowing depth or any beta:

    gamma(x) = ln[(I1 - A1) At / ((It - At) A1)] / ln[(I1 - A1) A2 / ((I2 - A2) A1)]

Per-pixel values are pooled by a median within each superpixel, and the
whole-image value is the median over "dark" superpixels, those whose median
dark channel is at most ``dark_threshold``.
"""
import csv
import io
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dcp import DarkChannelParams, dark_channel
from .exceptions import DimensionMismatch, EmptyDarkSet, NoValidPixels
from .superpixel import grouped_lower_median, lower_median
from .validation import check_airlight, check_gray, check_image, check_same_shape

GUARDS = ("near_airlight", "log_domain", "flat_denominator")


@dataclass(frozen=True)
class NrcParams:
    dark_threshold: float = 0.3
    eps_num: float = 1.0 / 255.0
    eps_log: float = 1e-3
    clamp_gamma: bool = True

    def __post_init__(self):
        if not 0.0 < self.dark_threshold <= 1.0:
            raise ValueError("dark_threshold must lie in (0, 1]")
        if self.eps_num <= 0 or self.eps_log <= 0:
            raise ValueError("guard epsilons must be > 0")


@dataclass(frozen=True, eq=False)
class ReferenceSet:
    I1: np.ndarray
    A1: np.ndarray
    I2: np.ndarray
    A2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "I1", check_image(self.I1, "I1"))
        object.__setattr__(self, "I2", check_image(self.I2, "I2"))
        object.__setattr__(self, "A1", check_airlight(self.A1, "A1"))
        object.__setattr__(self, "A2", check_airlight(self.A2, "A2"))
        check_same_shape(self.I1, self.I2, names=("I1", "I2"))

    @property
    def shape(self):
        return self.I1.shape[:2]


class GammaField(NamedTuple):
    gamma: np.ndarray      # clamped if requested; 0 where invalid
    valid: np.ndarray
    raw: np.ndarray        # unclamped; 0 where invalid
    diagnostics: dict


class SpGammas(NamedTuple):
    index: np.ndarray
    gamma: np.ndarray
    valid_count: np.ndarray


def _lower_median_channels(values, usable):
    """Lower median over the usable entries of the last axis (size 3)."""
    filled = np.where(usable, values, np.inf)
    filled.sort(axis=-1)
    k = usable.sum(axis=-1)
    pick = np.maximum(k - 1, 0) // 2
    out = np.take_along_axis(filled, pick[..., None], axis=-1)[..., 0]
    return np.where(k > 0, out, 0.0)


def _log_ratio(num, den):
    """ln(num / den) where the ratio is positive, else 0; returns (value, ok)."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = num / den
        ok = np.isfinite(ratio) & (ratio > 0)
        return np.log(np.where(ok, ratio, 1.0)), ok


def normalized_depth(I1, A1, I2, A2, guards=NrcParams()):
    """Per-pixel ``(beta2 - beta1) * d(x)`` from two captures.

    Returns ``(nd, valid)``. Each channel gives its own estimate; a channel
    is used when both captures are at least ``eps_num`` away from their
    airlight and the log argument is positive. The pixel value is the lower
    median over used channels, and a pixel without any is invalid (value 0).
    """
    refs = ReferenceSet(I1, A1, I2, A2)
    d1 = refs.I1 - refs.A1
    d2 = refs.I2 - refs.A2
    lr, ok = _log_ratio(d2, d1)
    used = ok & (np.abs(d1) >= guards.eps_num) & (np.abs(d2) >= guards.eps_num)
    nd_c = -lr - np.log(refs.A1 / refs.A2)
    valid = used.any(-1)
    nd = _lower_median_channels(nd_c, used)
    return np.where(valid, nd, 0.0), valid


def _gamma_field(refs, It, At, guards):
    It = check_image(It, "It")
    At = check_airlight(At, "At")
    check_same_shape(refs.I1, It, names=("references", "It"))
    d1 = refs.I1 - refs.A1
    d2 = refs.I2 - refs.A2
    dt = It - At
    eps = guards.eps_num
    near = ((np.abs(d1) < eps) | (np.abs(d2) < eps) | (np.abs(dt) < eps)).any(-1)

    num, ok_num = _log_ratio(d1 * At, dt * refs.A1)
    den, ok_den = _log_ratio(d1 * refs.A2, d2 * refs.A1)
    log_bad = ~(ok_num & ok_den).all(-1) & ~near

    usable = np.abs(den) >= guards.eps_log
    flat = ~usable.any(-1) & ~near & ~log_bad
    valid = ~(near | log_bad | flat)

    with np.errstate(divide="ignore", invalid="ignore"):
        gamma_c = np.where(usable, num / np.where(usable, den, 1.0), 0.0)
    raw = _lower_median_channels(gamma_c, usable & valid[..., None])
    raw = np.where(valid, raw, 0.0)
    gamma = np.clip(raw, 0.0, 1.0) if guards.clamp_gamma else raw
    diagnostics = {
        "total": int(valid.size),
        "valid": int(valid.sum()),
        "near_airlight": int(near.sum()),
        "log_domain": int(log_bad.sum()),
        "flat_denominator": int(flat.sum()),
        "clamped": int(((raw < 0) | (raw > 1))[valid].sum()) if guards.clamp_gamma else 0,
    }
    return GammaField(gamma, valid, raw, diagnostics)


def gamma_pixelwise(refs, It, At, guards=NrcParams()):
    """Per-pixel NRC. Returns ``(gamma, valid)``; gamma is 0 where invalid.

    Each channel gives its own estimate; the pixel value is the lower median
    over channels whose denominator log is at least ``eps_log`` in magnitude.
    """
    out = _gamma_field(refs, It, At, guards)
    return out.gamma, out.valid


def gamma_per_sp(gamma_map, mask, labeling):
    """Median of valid per-pixel gammas within each superpixel.

    Superpixels without valid pixels are left out of the result.
    """
    gamma_map = check_gray(gamma_map, "gamma_map")
    mask = np.asarray(mask, dtype=bool)
    if gamma_map.shape != labeling.shape or mask.shape != labeling.shape:
        raise DimensionMismatch("gamma map, mask and labeling must share a size")
    med, count = grouped_lower_median(gamma_map[mask], labeling.labels[mask], labeling.n_sp)
    keep = np.flatnonzero(count > 0)
    return SpGammas(keep, med[keep], count[keep])


def select_dark_sps(dc_of_It, labeling, z_n):
    """Indices of superpixels whose median dark channel is at most ``z_n``."""
    dc = check_gray(dc_of_It, "dark channel")
    if dc.shape != labeling.shape:
        raise DimensionMismatch("dark channel and labeling differ in size")
    z, _ = grouped_lower_median(dc, labeling.labels, labeling.n_sp)
    selected = np.flatnonzero(z <= z_n)
    if selected.size == 0:
        raise EmptyDarkSet(f"no superpixel has median dark channel <= {z_n}")
    return selected


@dataclass(eq=False)
class NrcReport:
    gamma_dot: float
    gamma_dot_raw: float
    gamma_map: np.ndarray
    gamma_map_raw: np.ndarray
    valid: np.ndarray
    sp: SpGammas
    sp_raw_gamma: np.ndarray
    dark_medians: np.ndarray
    dark_set: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_sp(self):
        return len(self.dark_medians)

    @property
    def out_of_range(self):
        return not 0.0 <= self.gamma_dot_raw <= 1.0

    def rows(self):
        """One dict per superpixel: k, gamma_k, Z_k, selected, valid_count."""
        gamma = dict(zip(self.sp.index.tolist(), self.sp.gamma.tolist()))
        count = dict(zip(self.sp.index.tolist(), self.sp.valid_count.tolist()))
        selected = set(self.dark_set.tolist())
        for k in range(self.n_sp):
            yield {
                "k": k,
                "gamma_k": gamma.get(k, ""),
                "Z_k": float(self.dark_medians[k]),
                "selected": int(k in selected),
                "valid_count": count.get(k, 0),
            }

    def to_csv(self, path=None):
        """Write the per-superpixel table; returns the text if ``path`` is None."""
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["k", "gamma_k", "Z_k", "selected", "valid_count"])
        writer.writeheader()
        writer.writerows(self.rows())
        if path is None:
            return buf.getvalue()
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())

    def summary(self):
        d = self.diagnostics
        parts = [f"gamma_dot={self.gamma_dot:.6f}", f"gamma_dot_raw={self.gamma_dot_raw:.6f}",
                 f"dark_sps={len(self.dark_set)}/{self.n_sp}"]
        parts += [f"{k}={d[k]}" for k in ("valid", "near_airlight", "log_domain", "flat_denominator", "clamped") if k in d]
        if self.out_of_range:
            parts.append("out_of_range=1")
        return " ".join(parts)


def _assemble(field_, sp, sp_raw, dark_medians, z_n, clamp, diagnostics):
    if field_.valid.sum() == 0:
        raise NoValidPixels(f"every pixel failed the numerical guards ({diagnostics})", diagnostics=diagnostics)
    dark_set = np.flatnonzero(dark_medians <= z_n)
    if dark_set.size == 0:
        raise EmptyDarkSet(f"no superpixel has median dark channel <= {z_n}", diagnostics=diagnostics)
    usable = np.isin(sp.index, dark_set)
    if not usable.any():
        raise NoValidPixels(f"none of the {dark_set.size} dark superpixels has a valid pixel",
                            diagnostics=diagnostics)
    raw_dot = lower_median(sp_raw[usable])
    dot = min(max(raw_dot, 0.0), 1.0) if clamp else raw_dot
    diagnostics = dict(diagnostics, dark_sps=int(dark_set.size), dark_sps_used=int(usable.sum()))
    return NrcReport(dot, raw_dot, field_.gamma, field_.raw, field_.valid, sp, sp_raw,
                     dark_medians, dark_set, diagnostics)


def estimate_nrc(refs, It, At, labeling, params=NrcParams(), dc_params=DarkChannelParams()):
    """Whole-image NRC of ``It`` on the scale set by ``refs``.

    Composes the per-pixel gamma, per-superpixel medians, dark-superpixel
    selection on the dark channel of ``It`` and the final median.
    """
    field_ = _gamma_field(refs, It, At, params)
    if labeling.shape != field_.gamma.shape:
        raise DimensionMismatch("labeling does not match the images")
    sp = gamma_per_sp(field_.gamma, field_.valid, labeling)
    sp_raw = gamma_per_sp(field_.raw, field_.valid, labeling).gamma
    dark_medians, _ = grouped_lower_median(dark_channel(It, dc_params), labeling.labels, labeling.n_sp)
    return _assemble(field_, sp, sp_raw, dark_medians, params.dark_threshold,
                     params.clamp_gamma, field_.diagnostics)
