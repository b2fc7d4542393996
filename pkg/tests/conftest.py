import numpy as np
import pytest

from pohlab.cgh import generate_complex_hologram
from pohlab.phase_retrieval import FidocConfig, fidoc
from pohlab.scenes import builtin_scene
from pohlab.wavefield import SlmParams


@pytest.fixture(scope="session")
def poh_cache():
    """Memoized (params, scene, poh, trace) per pipeline configuration.

    FIDOC at 512^2 costs over a second, and several test modules plus the
    acceptance suite reuse the same holograms.
    """
    cache = {}

    def get(scene_name="twocards", depth=0.5, seed=1, grid=512, iters=30, beta=0.5):
        key = (scene_name, depth, seed, grid, iters, beta)
        if key not in cache:
            params = SlmParams(width=grid, height=grid)
            scene = builtin_scene(scene_name, params, depth=depth)
            holo = generate_complex_hologram(scene, params, seed)
            poh, trace = fidoc(holo, scene, FidocConfig(iterations=iters, beta=beta))
            cache[key] = (params, scene, poh, trace)
        return cache[key]

    return get


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
