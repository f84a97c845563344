import sys

import numpy as np
import pytest

from hazenrc.superpixel import SlicParams, segment
from hazenrc.synth import (PRESETS, CheckerGrid, FlatPatches, LinearRamp, SceneSpec, generate_scene,
                           reference_pair)


@pytest.fixture(scope="session")
def small_scene():
    """96 x 72 outdoor-like scene (sky band) with its reference pair."""
    spec = SceneSpec(96, 72, LinearRamp(0.1, 4.0), FlatPatches(7, 20), dark_fraction=0.2,
                     sky_band_rows=12, name="small")
    albedo, depth = generate_scene(spec, seed=11)
    return albedo, depth, reference_pair(albedo, depth)


@pytest.fixture(scope="session")
def small_labeling(small_scene):
    _, _, (I1, _, _, _) = small_scene
    return segment(I1, SlicParams(target_sp_count=60))


@pytest.fixture(scope="session")
def checker_scene():
    spec = SceneSpec(160, 120, LinearRamp(0.1, 3.0), CheckerGrid(12), sky_band_rows=16, name="grid")
    return generate_scene(spec, seed=5)


@pytest.fixture(scope="session")
def road_scene():
    spec, seed = PRESETS["road"]
    return generate_scene(spec, seed)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
