import numpy as np
import pytest

from pohlab.wavefield import (
    ComplexField,
    IntensityImage,
    PhaseHologram,
    PropagationAliasingWarning,
    SlmParams,
    aliasing_limit_m,
    field_to_phase,
    intensity,
    phase_to_field,
    propagate,
    read_cfld,
    write_cfld,
)


def random_field(rng, w=64, h=64, pitch=8e-6):
    params = SlmParams(width=w, height=h, pixel_pitch=pitch)
    data = rng.normal(size=(h, w)) + 1j * rng.normal(size=(h, w))
    return ComplexField(params, data)


class TestParams:
    def test_invariants(self):
        with pytest.raises(ValueError):
            SlmParams(width=4)
        with pytest.raises(ValueError):
            SlmParams(pixel_pitch=0)
        with pytest.raises(ValueError):
            SlmParams(wavelength=-1)
        with pytest.raises(ValueError):
            SlmParams(phase_bits=10)

    def test_field_validation(self, rng):
        params = SlmParams(width=16, height=16)
        with pytest.raises(ValueError):
            ComplexField(params, np.zeros((8, 8), complex))
        bad = np.zeros((16, 16), complex)
        bad[3, 3] = np.nan
        with pytest.raises(ValueError):
            ComplexField(params, bad)

    def test_hologram_validation(self):
        params = SlmParams(width=16, height=16)
        with pytest.raises(ValueError):
            PhaseHologram(params, np.full((16, 16), 300))
        with pytest.raises(ValueError):
            PhaseHologram(params, np.zeros((8, 8), np.uint8))


class TestPropagate:
    def test_z0_identity(self, rng):
        u = random_field(rng)
        v = propagate(u, 0.0)
        assert np.array_equal(v.data, u.data)

    def test_invertibility(self, rng):
        for _ in range(10):
            u = random_field(rng, w=48, h=64)
            z = rng.uniform(-5.0, 5.0)
            w = propagate(propagate(u, z, warn_aliasing=False), -z, warn_aliasing=False)
            assert np.max(np.abs(w.data - u.data)) <= 1e-6 * np.max(np.abs(u.data))

    def test_energy_conservation(self, rng):
        for z in (0.01, 0.25, 2.0, 10.0, -3.0):
            u = random_field(rng)
            v = propagate(u, z, warn_aliasing=False)
            assert abs(v.energy() - u.energy()) <= 1e-6 * u.energy()

    def test_linearity(self, rng):
        u1 = random_field(rng)
        u2 = ComplexField(u1.params, rng.normal(size=u1.data.shape) * 1j)
        a, b = 2.5, -1.25 + 0.5j
        combo = ComplexField(u1.params, a * u1.data + b * u2.data)
        lhs = propagate(combo, 0.8, warn_aliasing=False).data
        rhs = (
            a * propagate(u1, 0.8, warn_aliasing=False).data
            + b * propagate(u2, 0.8, warn_aliasing=False).data
        )
        assert np.max(np.abs(lhs - rhs)) <= 1e-9 * np.max(np.abs(rhs))

    def test_uniform_plane_wave(self):
        params = SlmParams(width=128, height=128)
        u = ComplexField(params, np.ones((128, 128), complex))
        v = propagate(u, 0.25, warn_aliasing=False)
        center = abs(v.data[64, 64])
        assert abs(center - 1.0) < 0.01

    def test_z_limit(self, rng):
        with pytest.raises(ValueError):
            propagate(random_field(rng), 10.5)

    def test_aliasing_warning(self, rng):
        u = random_field(rng, w=32, h=32)
        limit = aliasing_limit_m(u.params)
        with pytest.warns(PropagationAliasingWarning):
            propagate(u, 2 * limit)

    def test_pad_factor_agrees_below_alias_limit(self, rng):
        # padding only changes boundary behavior; for a compact source well
        # below the aliasing limit the padded and unpadded results agree
        params = SlmParams(width=64, height=64)
        data = np.zeros((64, 64), complex)
        data[24:40, 24:40] = rng.normal(size=(16, 16))
        u = ComplexField(params, data)
        z = 0.0005
        assert z < aliasing_limit_m(params)
        a = propagate(u, z, warn_aliasing=False)
        b = propagate(u, z, pad_factor=2, warn_aliasing=False)
        assert b.params.shape == a.params.shape
        assert np.max(np.abs(a.data - b.data)) <= 0.02 * np.max(np.abs(a.data))


class TestPhaseConversions:
    def test_zero_poh_gives_ones(self):
        params = SlmParams(width=8, height=8)
        poh = PhaseHologram(params, np.zeros((8, 8), np.uint8))
        assert np.allclose(phase_to_field(poh).data, 1.0)

    def test_half_and_quarter_range(self):
        params = SlmParams(width=8, height=8)
        half = phase_to_field(PhaseHologram(params, np.full((8, 8), 128, np.uint8)))
        assert np.max(np.abs(half.data - (-1.0))) < 1e-12
        quarter = phase_to_field(PhaseHologram(params, np.full((8, 8), 64, np.uint8)))
        assert np.max(np.abs(quarter.data - 1j)) < 1e-12

    def test_field_to_phase_pi(self):
        params = SlmParams(width=8, height=8)
        fld = ComplexField(params, np.full((8, 8), np.exp(1j * np.pi)))
        assert np.all(field_to_phase(fld).samples == 128)

    def test_one_plus_j(self):
        params = SlmParams(width=8, height=8)
        fld = ComplexField(params, np.full((8, 8), 1 + 1j))
        assert np.all(field_to_phase(fld).samples == 32)

    def test_roundtrip_identity_all_values(self):
        params = SlmParams(width=16, height=16)
        samples = np.arange(256, dtype=np.uint8).reshape(16, 16)
        poh = PhaseHologram(params, samples)
        back = field_to_phase(phase_to_field(poh))
        assert np.array_equal(back.samples, poh.samples)

    def test_roundtrip_identity_random(self, rng):
        params = SlmParams(width=32, height=16)
        poh = PhaseHologram(params, rng.integers(0, 256, (16, 32), dtype=np.uint8))
        assert np.array_equal(field_to_phase(phase_to_field(poh)).samples, poh.samples)

    def test_zero_amplitude_maps_to_zero(self):
        params = SlmParams(width=8, height=8)
        data = np.full((8, 8), -1.0 + 0j)
        data[2, 2] = 0.0
        poh = field_to_phase(ComplexField(params, data))
        assert poh.samples[2, 2] == 0
        assert poh.samples[0, 0] == 128


class TestIntensity:
    def test_examples(self):
        params = SlmParams(width=8, height=8)
        ones = intensity(ComplexField(params, np.ones((8, 8), complex)))
        assert np.all(ones.values == 1.0)
        v = intensity(ComplexField(params, np.full((8, 8), 3 + 4j)))
        assert np.allclose(v.values, 25.0)

    def test_energy_identity(self, rng):
        u = random_field(rng)
        assert intensity(u).total() == pytest.approx(u.energy())

    def test_validation(self):
        with pytest.raises(ValueError):
            IntensityImage(4, 4, -np.ones((4, 4)))


class TestCfld:
    def test_roundtrip(self, tmp_path, rng):
        u = random_field(rng, w=24, h=12)
        path = tmp_path / "u.cfld"
        write_cfld(u, path)
        v = read_cfld(path, u.params)
        assert np.array_equal(v.data, u.data)

    def test_default_params(self, tmp_path, rng):
        u = random_field(rng, w=24, h=12)
        path = tmp_path / "u.cfld"
        write_cfld(u, path)
        v = read_cfld(path)
        assert (v.params.width, v.params.height) == (24, 12)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.cfld"
        path.write_bytes(b"NOPE" + b"\0" * 12)
        with pytest.raises(ValueError):
            read_cfld(path)

    def test_truncated(self, tmp_path, rng):
        u = random_field(rng, w=8, h=8)
        path = tmp_path / "u.cfld"
        write_cfld(u, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(ValueError):
            read_cfld(path)
