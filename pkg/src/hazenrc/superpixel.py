"""SLIC superpixels and per-superpixel robust statistics.

Superpixels serve as iso-depth regions: pixels inside one superpixel are
assumed to share a scene depth.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .exceptions import DimensionMismatch, ImageTooSmall
from .imgcore import save_gray16
from .validation import check_gray, check_image

# linear sRGB (D65) -> XYZ
_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])


def rgb_to_lab(img):
    """CIELAB coordinates of a linear-RGB image (L in [0, 100])."""
    xyz = check_image(img) @ _RGB_TO_XYZ.T / _WHITE_D65
    eps = (6.0 / 29.0) ** 3
    f = np.where(xyz > eps, np.cbrt(xyz), xyz / (3 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack([L, a, b], axis=-1)


@dataclass(frozen=True)
class SlicParams:
    target_sp_count: int = 400
    compactness: float = 10.0
    max_iters: int = 10
    color_space: str = "lab"

    def __post_init__(self):
        if self.target_sp_count < 1:
            raise ValueError("target_sp_count must be >= 1")
        if self.compactness < 0:
            raise ValueError("compactness must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.color_space not in ("lab", "rgb"):
            raise ValueError(f"color_space must be 'lab' or 'rgb', got {self.color_space!r}")


@dataclass(frozen=True, eq=False)
class SuperpixelLabeling:
    """A partition of the image plane into ``n_sp`` labelled regions.

    ``centroids`` holds (x, y) pixel coordinates; ``mean_rgb`` is the mean
    colour of the image the labeling was computed from (zeros if none).
    """
    labels: np.ndarray
    n_sp: int
    centroids: np.ndarray
    mean_rgb: np.ndarray
    pixel_count: np.ndarray

    @classmethod
    def from_labels(cls, labels, image=None):
        labels = np.asarray(labels)
        if labels.ndim != 2 or labels.size == 0:
            raise DimensionMismatch(f"labels must be a nonempty (H, W) array, got {labels.shape}")
        if not np.issubdtype(labels.dtype, np.integer):
            raise ValueError("labels must be integers")
        labels = labels.astype(np.intp)
        if labels.min() < 0:
            raise ValueError("labels must be nonnegative")
        n_sp = int(labels.max()) + 1
        flat = labels.ravel()
        count = np.bincount(flat, minlength=n_sp)
        if np.any(count == 0):
            raise ValueError("every label in [0, n_sp) must own at least one pixel")
        yy, xx = np.indices(labels.shape)
        centroids = np.column_stack([
            np.bincount(flat, weights=xx.ravel(), minlength=n_sp) / count,
            np.bincount(flat, weights=yy.ravel(), minlength=n_sp) / count,
        ])
        mean_rgb = np.zeros((n_sp, 3))
        if image is not None:
            image = check_image(image)
            if image.shape[:2] != labels.shape:
                raise DimensionMismatch("image and labels differ in size")
            for c in range(3):
                mean_rgb[:, c] = np.bincount(flat, weights=image[..., c].ravel(), minlength=n_sp) / count
        labels.setflags(write=False)
        return cls(labels, n_sp, centroids, mean_rgb, count)

    @property
    def shape(self):
        return self.labels.shape

    def grid_spacing(self):
        """Mean superpixel side length, sqrt(pixels per superpixel)."""
        return math.sqrt(self.labels.size / self.n_sp)

    def save(self, path):
        """Dump the label map as a 16-bit grayscale PNG."""
        save_gray16(self.labels, path)


def _grid_seeds(height, width, target, offset=(0, 0)):
    """Regular seed lattice; ``offset`` = (dx, dy) translates it (cyclically)."""
    step = math.sqrt(height * width / target)
    ny = min(height, max(1, round(height / step)))
    nx = min(width, max(1, round(width / step)))
    sy, sx = height / ny, width / nx
    dx, dy = offset
    cy = np.sort(((np.arange(ny) + 0.5) * sy + dy) % height) - 0.5
    cx = np.sort(((np.arange(nx) + 0.5) * sx + dx) % width) - 0.5
    cy, cx = np.clip(cy, 0, height - 1), np.clip(cx, 0, width - 1)
    yy, xx = np.meshgrid(cy, cx, indexing="ij")
    return np.column_stack([yy.ravel(), xx.ravel()]), sy, sx


def _perturb_seeds(seeds, feats):
    """Move each seed to the lowest-gradient pixel of its 3x3 neighbourhood."""
    h, w = feats.shape[:2]
    padded = np.pad(feats, ((1, 1), (1, 1), (0, 0)), mode="edge")
    gy = padded[2:, 1:-1] - padded[:-2, 1:-1]
    gx = padded[1:-1, 2:] - padded[1:-1, :-2]
    grad = (gy ** 2).sum(-1) + (gx ** 2).sum(-1)
    out = seeds.copy()
    for k, (y, x) in enumerate(seeds):
        iy, ix = int(round(y)), int(round(x))
        best = grad[iy, ix]
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                ny, nx = iy + dy, ix + dx
                if 0 <= ny < h and 0 <= nx < w and grad[ny, nx] < best:
                    best = grad[ny, nx]
                    out[k] = (ny, nx)
    return out


def _kmeans(feats, seeds, spacing, window, params):
    h, w = feats.shape[:2]
    n = len(seeds)
    centers_pos = seeds.astype(np.float64).copy()
    iy = np.clip(np.round(centers_pos[:, 0]).astype(int), 0, h - 1)
    ix = np.clip(np.round(centers_pos[:, 1]).astype(int), 0, w - 1)
    centers_feat = feats[iy, ix].copy()
    labels = np.full((h, w), -1, dtype=np.intp)
    yy, xx = np.indices((h, w), dtype=np.float64)
    weight = (params.compactness / spacing) ** 2
    flat_feats = feats.reshape(-1, feats.shape[2])

    for _ in range(params.max_iters):
        dist = np.full((h, w), np.inf)
        new = np.full((h, w), -1, dtype=np.intp)
        for k in range(n):
            cy, cx = centers_pos[k]
            y0, y1 = max(0, int(cy - window)), min(h, int(cy + window) + 2)
            x0, x1 = max(0, int(cx - window)), min(w, int(cx + window) + 2)
            if y0 >= y1 or x0 >= x1:
                continue
            dc = ((feats[y0:y1, x0:x1] - centers_feat[k]) ** 2).sum(-1)
            ds = (yy[y0:y1, x0:x1] - cy) ** 2 + (xx[y0:y1, x0:x1] - cx) ** 2
            d = dc + weight * ds
            win = dist[y0:y1, x0:x1]
            closer = d < win
            win[closer] = d[closer]
            new[y0:y1, x0:x1][closer] = k
        changed = not np.array_equal(new, labels)
        labels = new
        assigned = labels.ravel() >= 0
        lab = labels.ravel()[assigned]
        count = np.bincount(lab, minlength=n).astype(np.float64)
        alive = count > 0
        for j in range(feats.shape[2]):
            s = np.bincount(lab, weights=flat_feats[assigned, j], minlength=n)
            centers_feat[alive, j] = s[alive] / count[alive]
        sy = np.bincount(lab, weights=yy.ravel()[assigned], minlength=n)
        sx = np.bincount(lab, weights=xx.ravel()[assigned], minlength=n)
        centers_pos[alive, 0] = sy[alive] / count[alive]
        centers_pos[alive, 1] = sx[alive] / count[alive]
        if not changed:
            break
    return labels


def _components(labels):
    """4-connected components of equal-label regions, numbered in row-major
    order of their first pixel. Unassigned pixels (-1) form their own
    components. Returns (component map, number of components)."""
    h, w = labels.shape
    comp = np.full((h, w), -1, dtype=np.intp)
    next_id = 0
    four = ndimage.generate_binary_structure(2, 1)
    values = np.unique(labels)
    for v in values:
        cc, ncc = ndimage.label(labels == v, structure=four)
        if ncc:
            comp[cc > 0] = cc[cc > 0] - 1 + next_id
            next_id += ncc
    # renumber by first pixel in row-major order
    flat = comp.ravel()
    _, first = np.unique(flat, return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty(next_id, dtype=np.intp)
    remap[order] = np.arange(next_id)
    return remap[comp], next_id


def _adjacency(comp, n):
    pairs = [
        np.column_stack([comp[:, :-1].ravel(), comp[:, 1:].ravel()]),
        np.column_stack([comp[:-1, :].ravel(), comp[1:, :].ravel()]),
    ]
    pairs = np.concatenate(pairs)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    pairs = np.concatenate([pairs, pairs[:, ::-1]])
    pairs = np.unique(pairs, axis=0)
    neighbours = [[] for _ in range(n)]
    for a, b in pairs:
        neighbours[a].append(b)
    return neighbours


def enforce_connectivity(labels, min_size):
    """Relabel so every region is 4-connected.

    The largest fragment of each label keeps it; other fragments, unassigned
    pixels and regions smaller than ``min_size`` are merged into the largest
    adjacent region. Labels are renumbered 0..n-1 in row-major order.
    """
    comp, n = _components(labels)
    flat = comp.ravel()
    size = np.bincount(flat, minlength=n)
    owner = np.full(n, -1, dtype=np.intp)
    owner[flat] = labels.ravel()

    keep = np.zeros(n, dtype=bool)
    best_for_label = {}
    for c in range(n):
        lab = owner[c]
        if lab < 0:
            continue
        if lab not in best_for_label or size[c] > size[best_for_label[lab]]:
            best_for_label[lab] = c
    for c in best_for_label.values():
        keep[c] = size[c] >= min_size
    if not keep.any():
        keep[int(np.argmax(size))] = True

    neighbours = _adjacency(comp, n)
    target = np.where(keep, np.arange(n), -1)
    region_size = np.where(keep, size, 0)
    pending = [c for c in range(n) if not keep[c]]
    while pending:
        deferred = []
        for c in pending:
            cands = {target[nb] for nb in neighbours[c] if target[nb] >= 0}
            if not cands:
                deferred.append(c)
                continue
            t = min(cands, key=lambda r: (-region_size[r], r))
            target[c] = t
            region_size[t] += size[c]
        if len(deferred) == len(pending):
            raise RuntimeError("connectivity enforcement made no progress")
        pending = deferred

    merged = target[comp]
    _, first = np.unique(merged.ravel(), return_index=True)
    roots = merged.ravel()[np.sort(first)]
    remap = np.empty(n, dtype=np.intp)
    remap[roots] = np.arange(len(roots))
    return remap[merged]


def segment(img, params=SlicParams(), offset=(0, 0)):
    """SLIC superpixel segmentation with connectivity enforcement.

    Deterministic: seeds start on a regular grid, clusters are visited in a
    fixed order and ties in the assignment go to the lower cluster index.
    ``offset`` = (dx, dy) translates the seed grid; segmenting a view shifted
    by (dx, dy) with that offset reproduces the unshifted tessellation.
    """
    img = check_image(img)
    h, w = img.shape[:2]
    if params.target_sp_count > h * w:
        raise ImageTooSmall(f"{h}x{w} image cannot hold {params.target_sp_count} superpixels")
    feats = rgb_to_lab(img) if params.color_space == "lab" else img * 100.0
    seeds, sy, sx = _grid_seeds(h, w, params.target_sp_count, offset)
    spacing = math.sqrt(sy * sx)
    if len(seeds) > 1:
        seeds = _perturb_seeds(seeds, feats)
    window = math.ceil(max(sy, sx))
    labels = _kmeans(feats, seeds, spacing, window, params)
    min_size = max(1, int(0.25 * sy * sx))
    labels = enforce_connectivity(labels, min_size)
    return SuperpixelLabeling.from_labels(labels, img)


def grouped_lower_median(values, labels, n_groups):
    """Lower median of ``values`` within each group.

    Returns ``(medians, counts)``; groups with no members get NaN. For an
    even count the lower-middle element is taken, so every median is a
    member of its sample.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    counts = np.bincount(labels, minlength=n_groups)
    medians = np.full(n_groups, np.nan)
    if values.size:
        order = np.lexsort((values, labels))
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        present = counts > 0
        pick = starts[present] + (counts[present] - 1) // 2
        medians[present] = values[order][pick]
    return medians, counts


def lower_median(values):
    values = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if values.size == 0:
        raise ValueError("median of an empty sample")
    return float(values[(values.size - 1) // 2])


def sp_median(values, labeling):
    """Per-superpixel lower median of a scalar map."""
    values = check_gray(values)
    if values.shape != labeling.shape:
        raise DimensionMismatch(f"map {values.shape} does not match labeling {labeling.shape}")
    medians, _ = grouped_lower_median(values, labeling.labels, labeling.n_sp)
    return medians
