"""Dark channel and dark-channel-based airlight estimation."""
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .exceptions import EstimateIsZero
from .validation import check_image


@dataclass(frozen=True)
class DarkChannelParams:
    """Patch is (2r+1) x (2r+1), clipped at the image border."""
    patch_radius: int = 7

    def __post_init__(self):
        if self.patch_radius < 0:
            raise ValueError("patch_radius must be >= 0")


def dark_channel(img, params=DarkChannelParams()):
    """Minimum over a square patch of the per-pixel channel minimum."""
    gray = check_image(img).min(axis=2)
    if params.patch_radius == 0:
        return gray
    size = 2 * params.patch_radius + 1
    # edge replication never introduces values from outside the clipped patch
    return ndimage.minimum_filter(gray, size=size, mode="nearest")


def airlight_candidates(dc, top_fraction):
    """Flat indices of the brightest ``top_fraction`` of dark-channel pixels.

    Ties are broken by row-major order.
    """
    if not 0.0 < top_fraction <= 1.0:
        raise ValueError(f"top_fraction must lie in (0, 1], got {top_fraction}")
    flat = np.asarray(dc).ravel()
    n = max(1, math.ceil(top_fraction * flat.size))
    return np.argsort(-flat, kind="stable")[:n]


def estimate_airlight(img, params=DarkChannelParams(), top_fraction=0.001):
    """Mean RGB over the pixels with the highest dark-channel values."""
    img = check_image(img)
    dc = dark_channel(img, params)
    idx = airlight_candidates(dc, top_fraction)
    airlight = img.reshape(-1, 3)[idx].mean(axis=0)
    if np.any(airlight <= 0.0):
        raise EstimateIsZero(f"estimated airlight has a zero channel: {airlight.tolist()}")
    return airlight
