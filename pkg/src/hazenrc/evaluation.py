"""Synthetic corpus generation and the evaluation harness behind the CLI.

A corpus scene directory looks like::

    <out>/<scene>/scene.cfg        scene description (+ noise settings)
    <out>/<scene>/albedo.png       ground-truth albedo
    <out>/<scene>/depth.pfm        ground-truth depth
    <out>/<scene>/a<i>_b<beta>.png one capture per grid cell
    <out>/<scene>/manifest.csv

Manifest paths are relative to the manifest's directory.
"""
import csv
import math
import os
from dataclasses import asdict, dataclass, fields
from typing import List

import numpy as np

from .align import shift_image
from .estimators import NrcEstimator
from .exceptions import HazeError, ImageIOError
from .imgcore import load_depth, load_image, quantize16, save_depth, save_image
from .synth import (REFERENCE_AIRLIGHT_INDEX, REFERENCE_BETAS, HazeParams,
                    add_noise, format_scene_config, gamma_ground_truth, generate_scene,
                    benchmark_grid, parse_scene_config, synthesize)

MANIFEST_HEADER = ["scene", "airlight_r", "airlight_g", "airlight_b", "beta", "gamma_gt", "is_reference", "path"]
LIGHT_HAZE_GAMMA = 0.2


@dataclass
class ManifestRow:
    scene: str
    airlight: np.ndarray
    beta: float
    gamma_gt: float
    is_reference: bool
    path: str  # absolute once loaded


@dataclass
class Manifest:
    root: str
    rows: List[ManifestRow]
    noise_sigma: float = 0.0
    noise_seed: int = 0

    @property
    def references(self):
        refs = [r for r in self.rows if r.is_reference]
        return sorted(refs, key=lambda r: r.beta)

    @property
    def scene(self):
        return self.rows[0].scene

    def tests(self, include_references=False):
        return [r for r in self.rows if include_references or not r.is_reference]


def capture_name(a_idx, beta):
    return f"a{a_idx}_b{beta:.1f}.png"


def _noise_seed(seed, a_idx, beta):
    return [int(seed), int(a_idx), int(round(beta * 10))]


def render_capture(albedo, depth, airlight, beta, noise_sigma=0.0, noise_seed=None):
    """One capture exactly as stored in a corpus (noise, then 16-bit quantization)."""
    img = synthesize(albedo, depth, HazeParams(airlight, beta))
    if noise_sigma > 0:
        img = add_noise(img, noise_sigma, noise_seed)
    return quantize16(img) / 65535.0


def synth_scene(spec, seed, out_dir, noise_sigma=0.0):
    """Render the 5 x 11 grid for one scene; returns the manifest path."""
    scene_dir = os.path.join(out_dir, spec.name)
    os.makedirs(scene_dir, exist_ok=True)
    albedo, depth = generate_scene(spec, seed)
    cfg = format_scene_config(spec, seed) + f"noise = {noise_sigma!r}\n"
    with open(os.path.join(scene_dir, "scene.cfg"), "w") as fh:
        fh.write(cfg)
    save_image(albedo, os.path.join(scene_dir, "albedo.png"))
    save_depth(depth, os.path.join(scene_dir, "depth.pfm"))

    refs = {(REFERENCE_AIRLIGHT_INDEX[0], REFERENCE_BETAS[0]), (REFERENCE_AIRLIGHT_INDEX[1], REFERENCE_BETAS[1])}
    rows = []
    for a_idx, airlight, beta in benchmark_grid().cells():
        name = capture_name(a_idx, beta)
        img = render_capture(albedo, depth, airlight, beta, noise_sigma, _noise_seed(seed, a_idx, beta))
        save_image(img, os.path.join(scene_dir, name))
        rows.append(ManifestRow(spec.name, airlight, beta, gamma_ground_truth(beta), (a_idx, beta) in refs, name))
    path = os.path.join(scene_dir, "manifest.csv")
    write_manifest(rows, path)
    return path


def write_manifest(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for r in rows:
            writer.writerow([r.scene, *(repr(float(v)) for v in r.airlight), repr(float(r.beta)),
                             repr(float(r.gamma_gt)), int(r.is_reference), r.path])


def read_manifest(path):
    """Load a manifest (file or scene directory) and check its consistency."""
    if os.path.isdir(path):
        path = os.path.join(path, "manifest.csv")
    root = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != MANIFEST_HEADER:
                raise ValueError(f"{path}: unexpected manifest header {reader.fieldnames}")
            rows = [ManifestRow(
                scene=rec["scene"],
                airlight=np.array([float(rec[k]) for k in ("airlight_r", "airlight_g", "airlight_b")]),
                beta=float(rec["beta"]),
                gamma_gt=float(rec["gamma_gt"]),
                is_reference=rec["is_reference"].strip() == "1",
                path=os.path.join(root, rec["path"]),
            ) for rec in reader]
    except OSError as exc:
        raise ImageIOError(f"cannot read manifest {path}: {exc}") from exc
    except KeyError as exc:
        raise ValueError(f"{path}: malformed manifest row ({exc})") from exc
    if not rows:
        raise ValueError(f"{path}: manifest has no rows")
    if len({r.scene for r in rows}) != 1:
        raise ValueError(f"{path}: manifest mixes several scenes")
    if sum(r.is_reference for r in rows) != 2:
        raise ValueError(f"{path}: manifest must mark exactly two references")
    manifest = Manifest(root, rows)
    cfg_path = os.path.join(root, "scene.cfg")
    if os.path.exists(cfg_path):
        with open(cfg_path) as fh:
            for line in fh:
                key, _, value = line.partition("=")
                if key.strip() == "noise":
                    manifest.noise_sigma = float(value)
                elif key.strip() == "seed":
                    manifest.noise_seed = int(value)
    return manifest


@dataclass
class PrecisionRecord:
    scene: str
    beta_t: float
    gamma_gt: float
    gamma_hat: float
    abs_error: float
    airlight_error_linf: float
    dark_sp_count: int
    path: str = ""
    status: str = "ok"


@dataclass
class AblationRecord:
    scene: str
    arm: str
    z_n: float
    beta_t: float
    gamma_gt: float
    gamma_hat: float
    signed_error: float
    dark_sp_count: int
    path: str = ""
    status: str = "ok"


def write_records(records, path, cls):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f.name for f in fields(cls)])
        for rec in records:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in asdict(rec).values()])


def fit_on_manifest(manifest, estimator, true_airlight=False):
    r1, r2 = manifest.references
    images = [load_image(r1.path), load_image(r2.path)]
    airlights = (r1.airlight, r2.airlight) if true_airlight else None
    return estimator.fit(images, airlights=airlights)


def evaluate(manifest, estimator=None, include_references=False, true_airlight=False):
    """One PrecisionRecord per test capture of the manifest."""
    est = fit_on_manifest(manifest, estimator or NrcEstimator(), true_airlight)
    records = []
    for row in manifest.tests(include_references):
        img = load_image(row.path)
        at = row.airlight if true_airlight else est.estimate_airlight(img)
        err_a = float(np.max(np.abs(at - row.airlight)))
        rel = os.path.relpath(row.path, manifest.root)
        try:
            rep = est.report(img, at)
        except HazeError as exc:
            records.append(PrecisionRecord(row.scene, row.beta, row.gamma_gt, math.nan, math.nan,
                                           err_a, 0, rel, type(exc).__name__))
            continue
        records.append(PrecisionRecord(row.scene, row.beta, row.gamma_gt, rep.gamma_dot,
                                       abs(rep.gamma_dot - row.gamma_gt), err_a, len(rep.dark_set), rel))
    return records


def summarize(records):
    ok = [r for r in records if r.status == "ok"]
    errors = np.array([r.abs_error for r in ok])
    return {
        "n": len(records),
        "failed": len(records) - len(ok),
        "mae": float(errors.mean()) if ok else math.nan,
        "max_error": float(errors.max()) if ok else math.nan,
        "max_airlight_error": max((r.airlight_error_linf for r in records), default=math.nan),
    }


def ablate(manifest, estimator=None, include_references=False, true_airlight=False):
    """Paired runs: dark-SP selection at the estimator's threshold vs z_n = 1."""
    est = fit_on_manifest(manifest, estimator or NrcEstimator(), true_airlight)
    arms = [("selection_on", est.dark_threshold), ("selection_off", 1.0)]
    records = []
    for row in manifest.tests(include_references):
        img = load_image(row.path)
        at = row.airlight if true_airlight else est.estimate_airlight(img)
        rel = os.path.relpath(row.path, manifest.root)
        for arm, z_n in arms:
            try:
                rep = est.set_params(dark_threshold=z_n).report(img, at)
            except HazeError as exc:
                records.append(AblationRecord(row.scene, arm, z_n, row.beta, row.gamma_gt, math.nan,
                                              math.nan, 0, rel, type(exc).__name__))
                continue
            records.append(AblationRecord(row.scene, arm, z_n, row.beta, row.gamma_gt, rep.gamma_dot,
                                          rep.gamma_dot - row.gamma_gt, len(rep.dark_set), rel))
    est.set_params(dark_threshold=arms[0][1])
    return records


def summarize_ablation(records, light_gamma=LIGHT_HAZE_GAMMA):
    """Mean signed error per arm, over all captures and over light haze only."""
    out = {}
    for arm in dict.fromkeys(r.arm for r in records):
        ok = [r for r in records if r.arm == arm and r.status == "ok"]
        light = [r.signed_error for r in ok if r.gamma_gt <= light_gamma + 1e-9]
        out[arm] = {
            "mean_signed_error": float(np.mean([r.signed_error for r in ok])) if ok else math.nan,
            "light_mean_signed_error": float(np.mean(light)) if light else math.nan,
            "light_n": len(light),
            "failed": sum(r.status != "ok" for r in records if r.arm == arm),
        }
    return out


@dataclass
class AlignRecord:
    scene: str
    beta_t: float
    gamma_gt: float
    shift_dx: int
    shift_dy: int
    est_dx: int
    est_dy: int
    gamma_hat: float
    abs_error: float
    matched_sps: int
    path: str = ""
    status: str = "ok"


def load_scene_truth(manifest):
    """Ground-truth (albedo, depth), regenerated exactly from scene.cfg.

    The stored albedo.png / depth.pfm are quantized copies and serve only
    as a fallback when no config is present.
    """
    cfg_path = os.path.join(manifest.root, "scene.cfg")
    if os.path.exists(cfg_path):
        with open(cfg_path) as fh:
            spec, seed = parse_scene_config(fh.read())
        return generate_scene(spec, seed)
    albedo = load_image(os.path.join(manifest.root, "albedo.png"))
    depth = load_depth(os.path.join(manifest.root, "depth.pfm"))
    return albedo, depth


def align_demo(manifest, shift, estimator=None, betas=None, true_airlight=False):
    """Matched estimation on test captures re-rendered from a shifted camera.

    The shifted view translates the ground-truth albedo and depth by
    ``shift`` (edge replicated) and renders them exactly like the corpus.
    """
    est = estimator or NrcEstimator()
    dx, dy = shift
    albedo, depth = load_scene_truth(manifest)
    h, w = depth.shape
    if max(abs(dx), abs(dy)) > est.max_shift:
        raise ValueError(f"shift {shift} exceeds max_shift={est.max_shift}")
    if not est.max_shift < min(h, w) / 4:
        raise ValueError(f"max_shift={est.max_shift} too large for a {w}x{h} scene")
    est = fit_on_manifest(manifest, NrcEstimator(**dict(est.get_params(), align=True)), true_airlight)
    moved_albedo, moved_depth = shift_image(albedo, dx, dy), shift_image(depth, dx, dy)
    grid = benchmark_grid()
    records = []
    for row in manifest.tests():
        if betas is not None and not any(abs(row.beta - b) < 1e-9 for b in betas):
            continue
        a_idx = next(i for i, a in enumerate(grid.airlights) if np.allclose(a, row.airlight))
        img = render_capture(moved_albedo, moved_depth, row.airlight, row.beta, manifest.noise_sigma,
                             _noise_seed(manifest.noise_seed, a_idx, row.beta))
        at = row.airlight if true_airlight else est.estimate_airlight(img)
        rel = os.path.relpath(row.path, manifest.root)
        try:
            rep = est.report(img, at)
        except HazeError as exc:
            records.append(AlignRecord(row.scene, row.beta, row.gamma_gt, dx, dy, 0, 0, math.nan,
                                       math.nan, 0, rel, type(exc).__name__))
            continue
        d = rep.diagnostics
        records.append(AlignRecord(row.scene, row.beta, row.gamma_gt, dx, dy, d["shift_dx"], d["shift_dy"],
                                   rep.gamma_dot, abs(rep.gamma_dot - row.gamma_gt), d["matched_sps"], rel))
    return records


def scatter_plot(records, path, title="", label_attr="scene"):
    """gamma_gt vs gamma_hat scatter with the diagonal, saved as PNG."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 5), dpi=100)
    ax.plot([0, 1], [0, 1], color="0.6", lw=1)
    groups = dict.fromkeys(getattr(r, label_attr) for r in records)
    for g in groups:
        pts = [(r.gamma_gt, r.gamma_hat) for r in records if getattr(r, label_attr) == g and r.status == "ok"]
        if pts:
            x, y = zip(*pts)
            ax.scatter(x, y, s=12, label=str(g))
    ax.set_xlim(-0.05, 1.05)
    ax.set_ylim(-0.05, 1.05)
    ax.set_xlabel("ground truth NRC")
    ax.set_ylabel("estimated NRC")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)

