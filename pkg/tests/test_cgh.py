import numpy as np
import pytest

from pohlab.cgh import (
    SceneLayer,
    TargetScene,
    generate_complex_hologram,
    load_scene,
    load_scene_with_depthmap,
)
from pohlab.images import write_pgm, write_png_gray
from pohlab.scenes import builtin_scene
from pohlab.wavefield import SlmParams, intensity, propagate

PARAMS = SlmParams(width=128, height=128)


def ncc(x, y):
    x = x - x.mean()
    y = y - y.mean()
    return float(np.sum(x * y) / np.sqrt(np.sum(x * x) * np.sum(y * y)))


class TestSceneTypes:
    def test_layer_validation(self):
        with pytest.raises(ValueError):
            SceneLayer(np.full((8, 8), 1.5), 0.5)
        with pytest.raises(ValueError):
            SceneLayer(np.zeros((8, 8)), 0.1)  # below minimum depth
        with pytest.raises(ValueError):
            SceneLayer(np.zeros((8, 8)), 6.0)

    def test_scene_needs_layers(self):
        with pytest.raises(ValueError):
            TargetScene([])

    def test_dominant_layer(self):
        weak = SceneLayer(np.full((8, 8), 0.1), 0.5)
        strong = SceneLayer(np.full((8, 8), 0.9), 1.0)
        assert TargetScene([weak, strong]).dominant_layer() is strong


class TestLoadScene:
    def test_pgm_normalization(self, tmp_path):
        img = np.zeros((64, 48), np.uint8)
        img[10, 11] = 255
        img[5, 5] = 128
        path = tmp_path / "s.pgm"
        write_pgm(path, img)
        scene = load_scene(path, 0.75, 0.05, PARAMS)
        assert len(scene.layers) == 1
        assert scene.layers[0].depth == 0.75
        assert scene.layers[0].amplitude.max() == 1.0

    def test_all_black_empty_support(self, tmp_path):
        path = tmp_path / "b.pgm"
        write_pgm(path, np.zeros((32, 32), np.uint8))
        scene = load_scene(path, 0.5, 0.05, PARAMS)
        assert not scene.support().any()

    def test_16bit_pgm(self, tmp_path):
        img = np.zeros((16, 16), np.uint16)
        img[3, 4] = 65535
        path = tmp_path / "d.pgm"
        write_pgm(path, img, maxval=65535)
        scene = load_scene(path, 0.5, 0.05, PARAMS)
        assert scene.layers[0].amplitude.max() == 1.0

    def test_png(self, tmp_path):
        img = np.zeros((20, 20), np.uint8)
        img[10, 10] = 200
        path = tmp_path / "s.png"
        write_png_gray(path, img)
        scene = load_scene(path, 0.5, 0.05, PARAMS)
        assert scene.layers[0].amplitude.max() == pytest.approx(200 / 255)

    def test_centering(self, tmp_path):
        img = np.full((10, 10), 255, np.uint8)
        path = tmp_path / "c.pgm"
        write_pgm(path, img)
        scene = load_scene(path, 0.5, 0.05, PARAMS)
        amp = scene.layers[0].amplitude
        assert amp[59:69, 59:69].min() == 1.0
        assert amp[:59].sum() == 0 and amp[69:].sum() == 0

    def test_oversize_rejected(self, tmp_path):
        path = tmp_path / "big.pgm"
        write_pgm(path, np.zeros((200, 200), np.uint8))
        with pytest.raises(ValueError):
            load_scene(path, 0.5, 0.05, PARAMS)


class TestDepthmap:
    def test_bucketing(self, tmp_path):
        img = np.full((32, 32), 200, np.uint8)
        depth = np.zeros((32, 32), np.uint8)
        depth[:16] = 255
        ipath, dpath = tmp_path / "i.pgm", tmp_path / "d.pgm"
        write_pgm(ipath, img)
        write_pgm(dpath, depth)
        scene = load_scene_with_depthmap(ipath, dpath, 0.5, 1.5, 4, 0.05, PARAMS)
        assert len(scene.layers) == 2
        depths = sorted(la.depth for la in scene.layers)
        assert depths[0] == pytest.approx(0.625)
        assert depths[1] == pytest.approx(1.375)

    def test_dim_mismatch(self, tmp_path):
        write_pgm(tmp_path / "i.pgm", np.zeros((16, 16), np.uint8))
        write_pgm(tmp_path / "d.pgm", np.zeros((8, 8), np.uint8))
        with pytest.raises(ValueError):
            load_scene_with_depthmap(
                tmp_path / "i.pgm", tmp_path / "d.pgm", 0.5, 1.5, 2, 0.05, PARAMS
            )


class TestGenerate:
    def test_determinism(self):
        scene = builtin_scene("twocards", PARAMS, depth=0.5)
        a = generate_complex_hologram(scene, PARAMS, seed=7)
        b = generate_complex_hologram(scene, PARAMS, seed=7)
        assert np.array_equal(a.data, b.data)
        c = generate_complex_hologram(scene, PARAMS, seed=8)
        assert not np.array_equal(a.data, c.data)

    def test_empty_scene_zero_field(self):
        scene = TargetScene([SceneLayer(np.zeros(PARAMS.shape), 0.5)])
        fld = generate_complex_hologram(scene, PARAMS, seed=1)
        assert np.all(fld.data == 0)

    def test_identical_layers_sum_exactly(self):
        amp = builtin_scene("twocards", PARAMS, depth=0.5).layers[0].amplitude
        one = TargetScene([SceneLayer(amp, 0.5)])
        two = TargetScene([SceneLayer(amp, 0.5), SceneLayer(amp, 0.5)])
        f1 = generate_complex_hologram(one, PARAMS, seed=3)
        f2 = generate_complex_hologram(two, PARAMS, seed=3)
        assert np.array_equal(f2.data, 2.0 * f1.data)

    def test_point_source_refocuses(self):
        amp = np.zeros(PARAMS.shape)
        amp[70, 50] = 1.0
        scene = TargetScene([SceneLayer(amp, 0.5)])
        holo = generate_complex_hologram(scene, PARAMS, seed=2)
        recon = intensity(propagate(holo, 0.5, warn_aliasing=False)).values
        assert np.unravel_index(np.argmax(recon), recon.shape) == (70, 50)

    def test_single_depth_reconstruction_ncc(self):
        scene = builtin_scene("twocards", PARAMS, depth=0.5)
        holo = generate_complex_hologram(scene, PARAMS, seed=5)
        recon = intensity(propagate(holo, 0.5, warn_aliasing=False)).values
        sup = scene.support()
        target = scene.layers[0].amplitude ** 2
        assert ncc(recon[sup], target[sup]) >= 0.99

    def test_grid_mismatch(self):
        scene = builtin_scene("twocards", SlmParams(width=64, height=64))
        with pytest.raises(ValueError):
            generate_complex_hologram(scene, PARAMS, seed=1)


class TestBuiltinScenes:
    def test_names(self):
        for name in ("twocards", "symbology", "fullframe"):
            scene = builtin_scene(name, PARAMS)
            assert scene.shape == PARAMS.shape
        with pytest.raises(ValueError):
            builtin_scene("nope", PARAMS)

    def test_guard_band_black_on_sparse_scenes(self):
        for name in ("twocards", "symbology"):
            amp = builtin_scene(name, PARAMS).layers[0].amplitude
            assert amp[:32].sum() == 0
            assert amp[:, :32].sum() == 0

    def test_fullframe_is_bright_everywhere(self):
        scene = builtin_scene("fullframe", PARAMS)
        assert scene.support().all()
