"""Forward haze synthesis and procedural ground-truth scenes.

The haze model is ``I_c = A_c * rho_c * t + A_c * (1 - t)`` with
``t = exp(-beta * d)``. Scenes are generated procedurally (albedo + depth)
so every synthesized capture comes with exact ground truth.
"""
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import ndimage

from .validation import check_airlight, check_depth, check_image, check_same_shape

# 8-bit airlight table used for the evaluation grid, one row per airlight.
GRID_AIRLIGHTS_8BIT = (
    (128, 154, 255),
    (219, 226, 255),
    (153, 255, 198),
    (234, 253, 255),
    (217, 219, 188),
)
GRID_BETAS = tuple(round(0.5 + 0.1 * i, 1) for i in range(11))
REFERENCE_BETAS = (0.5, 1.5)
# indices into GRID_AIRLIGHTS_8BIT
REFERENCE_AIRLIGHT_INDEX = (0, 4)

DEFAULT_PALETTE = (
    (0.55, 0.45, 0.35),
    (0.35, 0.50, 0.30),
    (0.60, 0.60, 0.65),
    (0.75, 0.70, 0.55),
    (0.30, 0.35, 0.50),
    (0.80, 0.50, 0.40),
    (0.45, 0.62, 0.70),
)
DARK_ALBEDO_MAX = 0.05


@dataclass(frozen=True)
class HazeParams:
    airlight: np.ndarray
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "airlight", check_airlight(self.airlight))
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be finite and > 0, got {self.beta}")


@dataclass(frozen=True)
class SynthGrid:
    airlights: Tuple[np.ndarray, ...]
    betas: Tuple[float, ...]

    def __post_init__(self):
        if not self.airlights or not self.betas:
            raise ValueError("grid lists must be nonempty")
        if any(b1 >= b2 for b1, b2 in zip(self.betas, self.betas[1:])):
            raise ValueError("betas must be strictly increasing")
        object.__setattr__(self, "airlights", tuple(check_airlight(a) for a in self.airlights))

    def cells(self):
        """Yield (airlight_index, airlight, beta) in airlight-major order."""
        for i, airlight in enumerate(self.airlights):
            for beta in self.betas:
                yield i, airlight, beta


def _check_depth_range(min_d, max_d):
    if not (0 < min_d <= max_d and math.isfinite(max_d)):
        raise ValueError(f"need 0 < min_d <= max_d, got {min_d}, {max_d}")


@dataclass(frozen=True)
class LinearRamp:
    """Linear depth ramp. Horizontal runs left (near) to right (far);
    vertical runs bottom (near) to the first row below the sky (far)."""
    min_d: float
    max_d: float
    axis: str = "vertical"

    def __post_init__(self):
        _check_depth_range(self.min_d, self.max_d)
        if self.axis not in ("horizontal", "vertical"):
            raise ValueError(f"axis must be horizontal or vertical, got {self.axis!r}")


@dataclass(frozen=True)
class Staircase:
    """``levels`` horizontal bands, nearest at the bottom."""
    levels: int
    min_d: float
    max_d: float

    def __post_init__(self):
        _check_depth_range(self.min_d, self.max_d)
        if self.levels < 1:
            raise ValueError("levels must be >= 1")


@dataclass(frozen=True)
class RadialBowl:
    """Nearest at the image centre, farthest at the corners."""
    min_d: float
    max_d: float

    def __post_init__(self):
        _check_depth_range(self.min_d, self.max_d)


def _check_palette(palette):
    pal = np.asarray(palette, dtype=np.float64)
    if pal.ndim != 2 or pal.shape[1] != 3 or len(pal) < 1:
        raise ValueError("palette must be a nonempty list of RGB triples")
    if pal.min() < 0 or pal.max() > 1:
        raise ValueError("palette albedos must lie in [0, 1]")
    return tuple(tuple(float(v) for v in row) for row in pal)


@dataclass(frozen=True)
class CheckerGrid:
    cell_px: int = 16
    palette: tuple = DEFAULT_PALETTE

    def __post_init__(self):
        if self.cell_px < 1:
            raise ValueError("cell_px must be >= 1")
        object.__setattr__(self, "palette", _check_palette(self.palette))


@dataclass(frozen=True)
class PerlinLike:
    seed: int = 0
    palette: tuple = DEFAULT_PALETTE

    def __post_init__(self):
        object.__setattr__(self, "palette", _check_palette(self.palette))


@dataclass(frozen=True)
class FlatPatches:
    seed: int = 0
    n_patches: int = 40
    palette: tuple = DEFAULT_PALETTE

    def __post_init__(self):
        if self.n_patches < 1:
            raise ValueError("n_patches must be >= 1")
        object.__setattr__(self, "palette", _check_palette(self.palette))


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    depth_profile: object
    albedo_texture: object
    dark_fraction: float = 0.2
    sky_band_rows: int = 0
    name: str = "scene"
    # weight pulling forced-dark pixels toward the nearest depths
    dark_near_bias: float = 1.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("scene dimensions must be positive")
        if not 0.0 <= self.dark_fraction <= 1.0:
            raise ValueError("dark_fraction must lie in [0, 1]")
        if not self.dark_near_bias >= 0:
            raise ValueError("dark_near_bias must be >= 0")
        if not 0 <= self.sky_band_rows < self.height:
            raise ValueError("sky_band_rows must lie in [0, height)")
        n_dark = math.ceil(self.dark_fraction * self.width * self.height)
        if n_dark > (self.height - self.sky_band_rows) * self.width:
            raise ValueError("dark_fraction does not fit below the sky band")
        if not isinstance(self.depth_profile, (LinearRamp, Staircase, RadialBowl)):
            raise TypeError(f"unknown depth profile {self.depth_profile!r}")
        if not isinstance(self.albedo_texture, (CheckerGrid, PerlinLike, FlatPatches)):
            raise TypeError(f"unknown albedo texture {self.albedo_texture!r}")


def transmission(depth, beta):
    """Transmission map ``exp(-beta * d)``."""
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    return np.exp(-beta * check_depth(depth))


def synthesize(albedo, depth, params):
    """Render a hazy capture of a scene with albedo ``albedo`` and depth ``depth``."""
    albedo = check_image(albedo, "albedo")
    depth = check_depth(depth)
    check_same_shape(albedo, depth, names=("albedo", "depth"))
    t = transmission(depth, params.beta)[:, :, None]
    A = params.airlight
    hazy = A * albedo * t + A * (1.0 - t)
    return np.clip(hazy, 0.0, 1.0)


def add_noise(img, sigma, seed=0):
    """Additive Gaussian sensor noise, clipped back to [0, 1]."""
    img = check_image(img)
    if sigma <= 0:
        return img
    rng = np.random.default_rng(seed)
    return np.clip(img + rng.normal(0.0, sigma, img.shape), 0.0, 1.0)


def benchmark_grid():
    """The 5 airlights x 11 scattering coefficients evaluation grid."""
    airlights = tuple(np.array(a, dtype=np.float64) / 255.0 for a in GRID_AIRLIGHTS_8BIT)
    return SynthGrid(airlights=airlights, betas=GRID_BETAS)


def gamma_ground_truth(beta, beta1=REFERENCE_BETAS[0], beta2=REFERENCE_BETAS[1]):
    return (beta - beta1) / (beta2 - beta1)


def reference_pair(albedo, depth):
    """Render both reference captures: (I1, A1, I2, A2)."""
    grid = benchmark_grid()
    a1 = grid.airlights[REFERENCE_AIRLIGHT_INDEX[0]]
    a2 = grid.airlights[REFERENCE_AIRLIGHT_INDEX[1]]
    I1 = synthesize(albedo, depth, HazeParams(a1, REFERENCE_BETAS[0]))
    I2 = synthesize(albedo, depth, HazeParams(a2, REFERENCE_BETAS[1]))
    return I1, a1, I2, a2


# -- procedural scenes -------------------------------------------------------

def _smooth_field(rng, height, width, scale):
    """Band-limited random field in [0, 1] (value noise, cubic upsampling)."""
    gh = max(2, int(math.ceil(height / scale)) + 1)
    gw = max(2, int(math.ceil(width / scale)) + 1)
    coarse = rng.random((gh, gw))
    yy = np.linspace(0.0, gh - 1.0, height)
    xx = np.linspace(0.0, gw - 1.0, width)
    grid = np.meshgrid(yy, xx, indexing="ij")
    fine = ndimage.map_coordinates(coarse, grid, order=3, mode="nearest")
    lo, hi = fine.min(), fine.max()
    return (fine - lo) / (hi - lo) if hi > lo else np.zeros_like(fine)


def _depth_map(profile, height, width, sky):
    rows = height - sky
    depth = np.empty((height, width))
    if isinstance(profile, LinearRamp):
        if profile.axis == "horizontal":
            ramp = np.linspace(profile.min_d, profile.max_d, width) if width > 1 else np.array([profile.min_d])
            depth[:] = ramp[None, :]
        else:
            ramp = np.linspace(profile.max_d, profile.min_d, rows) if rows > 1 else np.array([profile.min_d])
            depth[sky:] = ramp[:, None]
    elif isinstance(profile, Staircase):
        levels = np.linspace(profile.min_d, profile.max_d, profile.levels) if profile.levels > 1 else np.array([profile.min_d])
        # band 0 at the bottom
        band = ((rows - 1 - np.arange(rows)) * profile.levels) // max(rows, 1)
        depth[sky:] = levels[band][:, None]
    else:
        yy, xx = np.mgrid[0:height, 0:width]
        cy, cx = (height - 1) / 2.0, (width - 1) / 2.0
        r = np.hypot(yy - cy, xx - cx)
        rmax = max(r.max(), 1e-12)
        depth[:] = profile.min_d + (profile.max_d - profile.min_d) * r / rmax
    depth[:sky] = profile.max_d
    return depth


def _texture(texture, rng, height, width):
    palette = np.asarray(texture.palette)
    if isinstance(texture, CheckerGrid):
        r, c = np.mgrid[0:height, 0:width] // texture.cell_px
        idx = (3 * r + 5 * c) % len(palette)
        return palette[idx]
    if isinstance(texture, PerlinLike):
        base = _smooth_field(rng, height, width, scale=max(height, width) / 5.0)
        idx = np.minimum((base * len(palette)).astype(int), len(palette) - 1)
        shade = 0.85 + 0.15 * _smooth_field(rng, height, width, scale=6.0)
        return palette[idx] * shade[:, :, None]
    # FlatPatches: Voronoi cells, each a random palette colour
    n = min(texture.n_patches, height * width)
    sites = np.column_stack([rng.random(n) * height, rng.random(n) * width])
    colours = rng.integers(0, len(palette), n)
    yy, xx = np.mgrid[0:height, 0:width]
    best = np.full((height, width), np.inf)
    owner = np.zeros((height, width), dtype=int)
    for i, (sy, sx) in enumerate(sites):
        d2 = (yy - sy) ** 2 + (xx - sx) ** 2
        closer = d2 < best
        best[closer] = d2[closer]
        owner[closer] = i
    return palette[colours[owner]]


def generate_scene(spec, seed=0):
    """Generate ``(albedo, depth)`` for ``spec``; deterministic in (spec, seed).

    At least ``dark_fraction`` of all pixels get an albedo whose minimum
    channel is at most 0.05. Sky rows get albedo 1 and the maximum depth.
    """
    height, width, sky = spec.height, spec.width, spec.sky_band_rows
    tex_seed = getattr(spec.albedo_texture, "seed", 0)
    rng = np.random.default_rng([int(seed), int(tex_seed)])
    albedo = _texture(spec.albedo_texture, rng, height, width).astype(np.float64)
    depth = _depth_map(spec.depth_profile, height, width, sky)

    n_dark = math.ceil(spec.dark_fraction * height * width)
    if n_dark:
        field_ = _smooth_field(rng, height, width, scale=max(height, width) / 6.0)
        # dark surfaces favour the foreground, where the dark channel stays low
        span = depth.max() - depth.min()
        nearness = (depth - depth.min()) / span if span > 0 else np.zeros_like(depth)
        ground = (field_ + spec.dark_near_bias * nearness)[sky:].ravel()
        order = np.argsort(ground, kind="stable")[:n_dark]
        mask = np.zeros(ground.size, dtype=bool)
        mask[order] = True
        mask = mask.reshape(height - sky, width)
        dark_colour = rng.uniform(0.0, 0.6 * DARK_ALBEDO_MAX, 3)
        jitter = rng.uniform(0.0, 0.4 * DARK_ALBEDO_MAX, (height - sky, width, 3))
        ground_albedo = albedo[sky:]
        ground_albedo[mask] = (dark_colour + jitter)[mask]
    albedo[:sky] = 1.0
    return np.clip(albedo, 0.0, 1.0), depth


# -- scene config files ------------------------------------------------------

def _parse_palette(text):
    return tuple(tuple(float(v) for v in item.split()) for item in text.split(";") if item.strip())


def _format_palette(palette):
    return "; ".join(" ".join(f"{v:g}" for v in rgb) for rgb in palette)


def parse_scene_config(text):
    """Parse a flat ``key = value`` scene description into (SceneSpec, seed)."""
    cfg = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg[key] = value

    def num(key, default=None, cast=float):
        if key not in cfg:
            if default is None:
                raise ValueError(f"missing config key {key!r}")
            return default
        return cast(cfg[key])

    min_d, max_d = num("min_depth"), num("max_depth")
    kind = cfg.get("depth", "linear_ramp")
    if kind == "linear_ramp":
        profile = LinearRamp(min_d, max_d, cfg.get("axis", "vertical"))
    elif kind == "staircase":
        profile = Staircase(num("levels", 4, int), min_d, max_d)
    elif kind == "radial_bowl":
        profile = RadialBowl(min_d, max_d)
    else:
        raise ValueError(f"unknown depth profile {kind!r}")

    palette = _parse_palette(cfg["palette"]) if "palette" in cfg else DEFAULT_PALETTE
    tex = cfg.get("texture", "patches")
    if tex == "checker":
        texture = CheckerGrid(num("cell_px", 16, int), palette)
    elif tex == "perlin":
        texture = PerlinLike(num("texture_seed", 0, int), palette)
    elif tex == "patches":
        texture = FlatPatches(num("texture_seed", 0, int), num("n_patches", 40, int), palette)
    else:
        raise ValueError(f"unknown texture {tex!r}")

    spec = SceneSpec(
        width=num("width", cast=int),
        height=num("height", cast=int),
        depth_profile=profile,
        albedo_texture=texture,
        dark_fraction=num("dark_fraction", 0.2),
        sky_band_rows=num("sky_band_rows", 0, int),
        name=cfg.get("name", "scene"),
        dark_near_bias=num("dark_near_bias", 1.0),
    )
    return spec, num("seed", 0, int)


def format_scene_config(spec, seed=0):
    """Inverse of :func:`parse_scene_config`."""
    p, t = spec.depth_profile, spec.albedo_texture
    lines = [
        f"name = {spec.name}",
        f"width = {spec.width}",
        f"height = {spec.height}",
        f"seed = {seed}",
        f"dark_fraction = {spec.dark_fraction!r}",
        f"sky_band_rows = {spec.sky_band_rows}",
        f"dark_near_bias = {spec.dark_near_bias!r}",
        f"min_depth = {p.min_d!r}",
        f"max_depth = {p.max_d!r}",
    ]
    if isinstance(p, LinearRamp):
        lines += ["depth = linear_ramp", f"axis = {p.axis}"]
    elif isinstance(p, Staircase):
        lines += ["depth = staircase", f"levels = {p.levels}"]
    else:
        lines += ["depth = radial_bowl"]
    if isinstance(t, CheckerGrid):
        lines += ["texture = checker", f"cell_px = {t.cell_px}"]
    elif isinstance(t, PerlinLike):
        lines += ["texture = perlin", f"texture_seed = {t.seed}"]
    else:
        lines += ["texture = patches", f"texture_seed = {t.seed}", f"n_patches = {t.n_patches}"]
    lines.append(f"palette = {_format_palette(t.palette)}")
    return "\n".join(lines) + "\n"


INDOOR_PALETTE = tuple(tuple(round(0.6 * v / 0.8, 4) for v in rgb) for rgb in DEFAULT_PALETTE)

# Outdoor scenes: sky band on top, dark foreground near the camera.
# Indoor scenes: no sky, albedo capped at 0.6.
PRESETS = {
    "road": (SceneSpec(320, 240, LinearRamp(0.1, 4.0, "vertical"), FlatPatches(1, 60),
                       dark_fraction=0.2, sky_band_rows=40, name="road"), 1),
    "church": (SceneSpec(320, 240, Staircase(5, 0.1, 4.0), CheckerGrid(20),
                         dark_fraction=0.2, sky_band_rows=48, name="church"), 2),
    "lawn": (SceneSpec(320, 240, RadialBowl(0.1, 4.0), PerlinLike(3),
                       dark_fraction=0.2, sky_band_rows=32, name="lawn"), 3),
    "couch": (SceneSpec(320, 240, Staircase(4, 0.1, 2.0), FlatPatches(4, 50, INDOOR_PALETTE),
                        dark_fraction=0.2, sky_band_rows=0, name="couch", dark_near_bias=0.0), 4),
    "flower": (SceneSpec(320, 240, RadialBowl(0.1, 3.0), PerlinLike(5, INDOOR_PALETTE),
                         dark_fraction=0.2, sky_band_rows=0, name="flower", dark_near_bias=0.0), 4),
}
OUTDOOR_PRESETS = ("road", "church", "lawn")
INDOOR_PRESETS = ("couch", "flower")
