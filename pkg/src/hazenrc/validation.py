"""Input validation helpers.

Images, depth maps and scalar maps are carried as plain numpy arrays; these
helpers enforce the container invariants at every public entry point and
return float64 copies-or-views that downstream code may rely on.
"""
import numpy as np

from .exceptions import DimensionMismatch, NegativeDepth


def check_image(img, name="image"):
    """Validate an RGB raster: shape (H, W, 3), finite, values in [0, 1]."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DimensionMismatch(f"{name} must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatch(f"{name} is empty: {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} values must lie in [0, 1]")
    return arr


def check_gray(values, name="map"):
    """Validate a scalar map: shape (H, W), finite."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatch(f"{name} must have shape (H, W), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_depth(depth, name="depth"):
    arr = check_gray(depth, name)
    if arr.min() < 0.0:
        raise NegativeDepth(f"{name} contains negative depths")
    return arr


def check_airlight(airlight, name="airlight"):
    """Validate an airlight triple; every channel must lie in (0, 1]."""
    arr = np.asarray(airlight, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise DimensionMismatch(f"{name} must have 3 channels, got {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.min() <= 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} channels must lie in (0, 1], got {arr.tolist()}")
    return arr


def check_same_shape(*arrays, names=None):
    """Raise DimensionMismatch unless all arrays share the same (H, W)."""
    shapes = [np.shape(a)[:2] for a in arrays]
    if len(set(shapes)) > 1:
        label = ", ".join(names) if names else "inputs"
        raise DimensionMismatch(f"{label} have mismatched sizes: {shapes}")
