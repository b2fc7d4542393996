import numpy as np
import pytest
from scipy import fft as sfft

from pohlab import baselines as bl
from pohlab.wavefield import TWO_PI, PhaseHologram, SlmParams


def noise_image(rng, shape=(128, 128), bits=8):
    return rng.integers(0, 1 << bits, size=shape).astype(
        np.uint8 if bits == 8 else np.uint16
    )


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            bl.DctCodecConfig("weird")
        with pytest.raises(ValueError):
            bl.DctCodecConfig("flat", delta=0)
        with pytest.raises(ValueError):
            bl.DctCodecConfig("default", quality=0)
        with pytest.raises(ValueError):
            bl.DctCodecConfig(sample_bits=9)
        with pytest.raises(ValueError):
            bl.DctCodecConfig(block=16)


class TestZigzag:
    def test_permutation(self):
        assert sorted(bl.ZIGZAG.tolist()) == list(range(64))
        # standard start of the scan: (0,0), (0,1), (1,0), (2,0), (1,1), (0,2)
        assert bl.ZIGZAG[:6].tolist() == [0, 1, 8, 16, 9, 2]


class TestExpGolomb:
    def test_pack_read_roundtrip(self, rng):
        values = np.concatenate([[0, 1, 2, 63, 64], rng.integers(0, 100000, 200)])
        codes, nbits = bl._ueg_code(values)
        payload, total = bl._pack_bits(codes, nbits)
        reader = bl._BitReader(payload, total)
        for v in values:
            assert reader.read_ueg() == v

    def test_signed_mapping_roundtrip(self, rng):
        levels = np.concatenate([[1, -1, 2, -2, 1000, -1000], rng.integers(1, 5000, 100) * rng.choice([-1, 1], 100)])
        codes, nbits = bl._ueg_code(bl._seg_to_ueg(levels))
        payload, total = bl._pack_bits(codes, nbits)
        reader = bl._BitReader(payload, total)
        for s in levels:
            assert reader.read_seg() == s


class TestDctCodec:
    def test_near_lossless(self, rng):
        img = noise_image(rng, (48, 64))
        rec = bl.dct_decode(bl.dct_encode(img, bl.DctCodecConfig("flat", delta=1e-3)))
        assert np.abs(rec.astype(int) - img.astype(int)).max() <= 1

    def test_all_zero_image(self):
        img = np.zeros((24, 24), np.uint8)
        blob = bl.dct_encode(img, bl.DctCodecConfig("flat", delta=8))
        assert np.all(bl.dct_decode(blob) == 0)

    def test_per_coefficient_quantization_bound(self, rng):
        # contract: dequantized coefficients sit within delta/2 of the originals
        img = noise_image(rng, (32, 32)).astype(np.float64)
        delta = 12.0
        blocks = img.reshape(4, 8, 4, 8).transpose(0, 2, 1, 3).reshape(-1, 8, 8)
        coeffs = sfft.dctn(blocks, type=2, norm="ortho", axes=(1, 2))
        deq = np.round(coeffs / delta) * delta
        assert np.abs(deq - coeffs).max() <= delta / 2 + 1e-9

    def test_pixel_error_bound(self, rng):
        img = (rng.integers(60, 200, size=(64, 64))).astype(np.uint8)
        delta = 16.0
        rec = bl.dct_decode(bl.dct_encode(img, bl.DctCodecConfig("flat", delta=delta)))
        # orthonormal transform: per-pixel error <= 8 * delta/2, plus rounding
        assert np.abs(rec.astype(float) - img.astype(float)).max() <= 4 * delta + 0.5

    def test_odd_dimensions_pad_reflect(self, rng):
        img = noise_image(rng, (19, 21))
        rec = bl.dct_decode(bl.dct_encode(img, bl.DctCodecConfig("flat", delta=1e-3)))
        assert rec.shape == img.shape
        assert np.abs(rec.astype(int) - img.astype(int)).max() <= 1

    def test_sixteen_bit_samples(self, rng):
        img = noise_image(rng, (32, 32), bits=16)
        cfg = bl.DctCodecConfig("flat", delta=1e-2, sample_bits=16)
        rec = bl.dct_decode(bl.dct_encode(img, cfg))
        assert rec.dtype == np.uint16
        assert np.abs(rec.astype(int) - img.astype(int)).max() <= 1

    def test_size_monotone_in_delta(self, rng):
        img = noise_image(rng)
        sizes = [
            len(bl.dct_encode(img, bl.DctCodecConfig("flat", delta=d)))
            for d in (4, 8, 16, 32, 64)
        ]
        assert all(a > b for a, b in zip(sizes, sizes[1:]))

    def test_flat_beats_default_on_noise_at_3bpp(self, rng):
        img = noise_image(rng, (256, 256))
        _, blob_f = bl.match_rate(img, 3.0, "flat", tol=0.02)
        _, blob_d = bl.match_rate(img, 3.0, "default", tol=0.02)
        assert abs(len(blob_f) * 8 / img.size - len(blob_d) * 8 / img.size) <= 0.05

        def psnr(a, b):
            mse = np.mean((a.astype(float) - b.astype(float)) ** 2)
            return 10 * np.log10(255**2 / mse)

        assert psnr(img, bl.dct_decode(blob_f)) >= psnr(img, bl.dct_decode(blob_d))

    def test_match_rate_tolerance(self, rng):
        img = noise_image(rng)
        for scheme in ("flat", "default"):
            _, blob = bl.match_rate(img, 2.5, scheme, tol=0.02)
            assert len(blob) * 8 / img.size == pytest.approx(2.5, abs=0.05)

    def test_match_rate_unreachable(self, rng):
        img = np.zeros((64, 64), np.uint8)
        with pytest.raises(ValueError):
            bl.match_rate(img, 50.0, "flat")

    def test_corrupt_streams(self, rng):
        img = noise_image(rng, (16, 16))
        blob = bl.dct_encode(img, bl.DctCodecConfig("flat", delta=8))
        with pytest.raises(bl.DctStreamError):
            bl.dct_decode(b"JUNK" + blob[4:])
        with pytest.raises(bl.DctStreamError):
            bl.dct_decode(blob[: len(blob) - 3])


class TestBitsForSpan:
    def test_paper_values(self):
        assert bl.bits_for_span(8 * np.pi) == 10
        assert bl.bits_for_span(512 * np.pi) == 16
        assert bl.bits_for_span(1024 * np.pi) == 17

    def test_small_spans(self):
        assert bl.bits_for_span(0.0) == 8
        assert bl.bits_for_span(TWO_PI) == 8
        assert bl.bits_for_span(TWO_PI * (1 + 1e-13)) == 8
        assert bl.bits_for_span(4 * np.pi) == 9

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            bl.bits_for_span(-1.0)


class TestItohUnwrap:
    def test_constant_unchanged(self):
        phase = np.full((16, 16), 1.25)
        uw = bl.itoh_unwrap(phase)
        assert np.allclose(uw.values, 1.25)
        assert uw.span == 0.0
        assert uw.container_bits == 8

    def test_wrapped_ramp(self):
        ramp = np.linspace(0, 4 * np.pi, 128, endpoint=False)
        phase = np.tile(np.mod(ramp, TWO_PI), (8, 1))
        uw = bl.itoh_unwrap(phase)
        assert uw.span == pytest.approx(4 * np.pi, rel=0.05)
        d_rows = np.diff(uw.values, axis=1)
        assert np.abs(d_rows).max() <= np.pi

    def test_rewrap_reproduces_input(self, rng):
        phase = rng.uniform(0, TWO_PI, size=(32, 32))
        uw = bl.itoh_unwrap(phase)
        assert np.allclose(np.mod(uw.values, TWO_PI), phase, atol=1e-9)

    def test_no_jump_along_path(self, rng):
        phase = rng.uniform(0, TWO_PI, size=(24, 24))
        uw = bl.itoh_unwrap(phase)
        assert np.abs(np.diff(uw.values[:, 0])).max() <= np.pi
        assert np.abs(np.diff(uw.values, axis=1)).max() <= np.pi

    def test_domain_validation(self):
        with pytest.raises(ValueError):
            bl.itoh_unwrap(np.full((8, 8), 7.0))
        with pytest.raises(ValueError):
            bl.itoh_unwrap(np.zeros(8))


class TestBlockUnwrap:
    def test_lossless_identity_paths(self, rng):
        params = SlmParams(width=64, height=48)
        poh = PhaseHologram(params, rng.integers(0, 256, (48, 64), np.uint8))
        for mode in ("block", "whole"):
            out, blob = bl.unwrap_pipeline_roundtrip(poh, None, mode=mode)
            assert blob is None
            assert np.array_equal(out.samples, poh.samples)

    def test_fixed_container_rewrap_preserves_phase(self, rng):
        # mod 2^c rewrapping is a whole number of 2*pi turns, so the lossless
        # path through a fixed 10-bit container is still the exact identity
        params = SlmParams(width=64, height=64)
        poh = PhaseHologram(params, rng.integers(0, 256, (64, 64), np.uint8))
        counts, bits = bl.unwrap_to_counts(poh, "block", container_bits=10)
        assert counts.min() >= 0 and counts.max() < 1024
        assert np.all(bits == 10)
        back = bl.rewrap_counts_to_poh(counts, poh)
        assert np.array_equal(back.samples, poh.samples)

    def test_block_dims_validated(self, rng):
        params = SlmParams(width=60, height=60, pixel_pitch=8e-6)
        poh = PhaseHologram(params, rng.integers(0, 256, (60, 60), np.uint8))
        with pytest.raises(ValueError):
            bl.unwrap_to_counts(poh, "block")

    def test_poh_block_spans_mostly_within_8pi(self, poh_cache):
        _, _, poh, _ = poh_cache(grid=256, iters=20)
        _, bits = bl.itoh_unwrap_blocks(poh)
        assert float((bits <= 10).mean()) >= 0.5

    def test_whole_frame_span_exceeds_10_bits(self, poh_cache):
        _, _, poh, _ = poh_cache(grid=256, iters=20)
        uw = bl.itoh_unwrap(poh.phase_radians())
        assert uw.span > 16 * np.pi
        assert uw.container_bits > 10

    def test_pipeline_with_codec_runs(self, rng):
        params = SlmParams(width=64, height=64)
        poh = PhaseHologram(params, rng.integers(0, 256, (64, 64), np.uint8))
        cfg = bl.DctCodecConfig("flat", delta=4.0, sample_bits=10)
        out, blob = bl.unwrap_pipeline_roundtrip(poh, cfg, mode="block")
        assert out.samples.shape == poh.samples.shape
        assert isinstance(blob, bytes) and len(blob) > 0
