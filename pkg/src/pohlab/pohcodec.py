"""Versatile PCM codec for phase-only holograms.

Two quantization modes share one container format:

* bit-plane mode: each coded pixel is truncated to its b most significant
  bits and the planes are transmitted MSB first, so a decoder can stop after
  any number of layers and fill the missing tail with the truncation-cell
  midpoint.  Quality increases monotonically (in max error) per layer.
* level mode: classic L-level scalar quantization; symbol indices are packed
  base-L in groups of 32.

Coding is restricted to an arbitrary per-pixel region of interest carried as
a run-length coded bitmap; pixels outside it are synthesized at the decoder
(seeded pseudo-random phase by default, constant optionally).

Wire format (`.poh`, little-endian):

    magic "POH1" | u16 width | u16 height | u8 mode (0 bit-plane, 1 level)
    bit-plane: u8 bits          level: u8 0 marker, u16 levels
    u8 layer_count | u8 fill_mode | u32 fill_seed_or_value
    RoI run lengths: alternating u32 counts, false-run first, summing to w*h
    layer payloads (bit-packed, each padded to a byte boundary)
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .cgh import TargetScene
from .wavefield import PhaseHologram, SlmParams

POH_MAGIC = b"POH1"

MODE_BITPLANE = 0
MODE_LEVEL = 1

FILL_CONSTANT = 0
FILL_SEEDED_RANDOM = 1


class PohStreamError(ValueError):
    """Raised for malformed, truncated or corrupt .poh data."""


@dataclass
class RoiMask:
    """Boolean coded-pixel mask with its coded fraction rho cached.

    Treat as immutable: build a new mask instead of mutating in place.
    """

    mask: np.ndarray
    rho: float = field(init=False)

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.ndim != 2:
            raise ValueError("RoI mask must be a 2-D bitmap")
        self.rho = float(self.mask.mean())

    @classmethod
    def full(cls, shape) -> "RoiMask":
        return cls(np.ones(shape, dtype=bool))

    @classmethod
    def empty(cls, shape) -> "RoiMask":
        return cls(np.zeros(shape, dtype=bool))

    @property
    def count(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True)
class SubhologramParams:
    """Eye-box geometry bounding the SLM region one object point feeds.

    The coded radius at depth z is the similar-triangles eye-box projection
    (D/2) * z / (z + z_e), optionally capped by the grating diffraction
    angle z * tan(asin(wavelength / (2 * pitch))).
    """

    eyebox_diameter: float = 4e-3
    eye_relief: float = 20e-3
    diffraction_cap: bool = False

    def __post_init__(self):
        if self.eyebox_diameter <= 0 or self.eye_relief <= 0:
            raise ValueError("eye-box diameter and eye relief must be positive")

    def radius_px(self, z: float, slm: SlmParams) -> int:
        r = 0.5 * self.eyebox_diameter * z / (z + self.eye_relief)
        if self.diffraction_cap:
            r = min(r, z * math.tan(math.asin(slm.wavelength / (2 * slm.pixel_pitch))))
        return int(round(r / slm.pixel_pitch))

    def aperture_fraction(self, z: float, slm: SlmParams) -> float:
        """Eye-box passband as a fraction of the SLM Nyquist frequency.

        Light from an object point at depth z reaches the eye-box only
        within the cone of half-angle (D/2)/(z + z_e); band-limiting
        generation and reconstruction to this cone confines each point's
        light to its sub-hologram, which is what makes RoI-skip coding
        near-lossless for the viewer.
        """
        f_cap = 0.5 * self.eyebox_diameter / ((z + self.eye_relief) * slm.wavelength)
        return min(1.0, f_cap * 2.0 * slm.pixel_pitch)


def nominal_rate_bpp(levels: int) -> float:
    """Nominal bits/pixel of L-level quantization over the coded pixels."""
    return math.log2(levels)


def quantization_levels(levels: int) -> np.ndarray:
    """Reconstruction levels round(i * 255 / (L - 1)), i = 0..L-1."""
    if not 2 <= levels <= 256:
        raise ValueError("level count must lie in [2, 256]")
    return np.floor(np.arange(levels) * 255.0 / (levels - 1) + 0.5).astype(np.int64)


def _level_lut(levels: int, wrap: bool) -> tuple[np.ndarray, np.ndarray]:
    """(index, value) lookup tables over all 256 sample values."""
    recon = quantization_levels(levels)
    samples = np.arange(256)[:, None]
    dist = np.abs(samples - recon[None, :])
    if wrap:
        dist = np.minimum(dist, 256 - dist)
    idx = np.argmin(dist, axis=1)  # argmin ties resolve to the lower level
    return idx, recon


def quantize_levels(poh: PhaseHologram, levels: int, wrap: bool = False) -> PhaseHologram:
    """Map every sample to the nearest of L reconstruction levels.

    Ties go to the lower level.  `wrap` switches to circular phase distance
    (255 and 0 treated as one count apart); off by default, matching plain
    scalar quantization.
    """
    idx, recon = _level_lut(levels, wrap)
    return PhaseHologram(poh.params, recon[idx[poh.samples]].astype(np.uint8))


def quantize_bitplanes(sample, bits: int):
    """Truncate to the `bits` most significant bits and refill the cell midpoint.

    Transmitted value t = floor(s / 2^(8-b)); reconstruction t * 2^(8-b) plus
    2^(8-b-1) for b < 8.  Max abs error is pi / 2^b radians (zero at b = 8).
    Accepts scalars or arrays.
    """
    if not 1 <= bits <= 8:
        raise ValueError("bit depth must lie in [1, 8]")
    arr = np.asarray(sample)
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError("samples must lie in [0, 255]")
    shift = 8 - bits
    recon = (arr.astype(np.int64) >> shift) << shift
    if bits < 8:
        recon += 1 << (shift - 1)
    if np.isscalar(sample) or arr.ndim == 0:
        return int(recon)
    return recon.astype(np.uint8)


# --- RoI run-length coding -------------------------------------------------


def _rle_encode(mask: np.ndarray) -> np.ndarray:
    """Alternating run lengths over the raster scan, false-run first."""
    flat = mask.ravel()
    n = flat.size
    if n == 0:
        return np.zeros(0, dtype=np.uint32)
    edges = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], edges, [n]))
    runs = np.diff(bounds)
    if flat[0]:
        runs = np.concatenate(([0], runs))
    return runs.astype(np.uint32)


def _rle_decode(runs: np.ndarray, shape) -> np.ndarray:
    n = shape[0] * shape[1]
    total = int(np.sum(runs, dtype=np.int64))
    if total != n:
        raise PohStreamError(f"RoI runs sum to {total}, expected {n}")
    flat = np.zeros(n, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if value:
            flat[pos : pos + int(run)] = True
        pos += int(run)
        value = not value
    return flat.reshape(shape)


# --- deterministic decoder-side fill ---------------------------------------


def _fill_bytes(seed: int, count: int) -> np.ndarray:
    """Pseudo-random bytes from BLAKE2b in counter mode.

    Pinned here (rather than a library RNG) so every decoder on every
    platform synthesizes identical non-RoI pixels from the header seed.
    """
    out = bytearray()
    counter = 0
    prefix = b"POH-fill" + struct.pack("<I", seed & 0xFFFFFFFF)
    while len(out) < count:
        out += hashlib.blake2b(
            prefix + struct.pack("<Q", counter), digest_size=64
        ).digest()
        counter += 1
    return np.frombuffer(bytes(out[:count]), dtype=np.uint8)


# --- container -------------------------------------------------------------


def _plane_bytes(n_roi: int) -> int:
    return (n_roi + 7) // 8


def _level_payload_bits(n_roi: int, levels: int, group: int = 32) -> int:
    per_group = (levels**group - 1).bit_length()
    full, rem = divmod(n_roi, group)
    bits = full * per_group
    if rem:
        bits += (levels**rem - 1).bit_length()
    return bits


@dataclass
class PohBitstream:
    """Parsed .poh container: header fields, RoI and layer payloads."""

    width: int
    height: int
    mode: int
    layer_count: int
    fill_mode: int
    fill_seed_or_value: int
    roi: RoiMask
    layers: list[bytes]
    bits: int | None = None
    levels: int | None = None

    def __post_init__(self):
        if self.mode not in (MODE_BITPLANE, MODE_LEVEL):
            raise PohStreamError(f"unknown mode {self.mode}")
        if self.mode == MODE_BITPLANE:
            if self.bits is None or not 1 <= self.bits <= 8:
                raise PohStreamError("bit-plane streams need bits in [1, 8]")
            if self.layer_count != self.bits:
                raise PohStreamError("layer count must equal coded bit depth")
        else:
            if self.levels is None or not 2 <= self.levels <= 256:
                raise PohStreamError("level streams need levels in [2, 256]")
            if self.layer_count != 1:
                raise PohStreamError("level streams carry exactly one layer")
        if self.roi.mask.shape != (self.height, self.width):
            raise PohStreamError("RoI dimensions do not match header")
        if len(self.layers) != self.layer_count:
            raise PohStreamError("layer payload count mismatch")

    # -- size accounting (exact, in bits) --

    @property
    def header_bits(self) -> int:
        base = 4 + 2 + 2 + 1 + 1 + 1 + 1 + 4  # magic..fill_seed, bitplane layout
        if self.mode == MODE_LEVEL:
            base += 2  # u16 level count after the marker byte
        return base * 8

    @property
    def rle_bits(self) -> int:
        return 32 * len(_rle_encode(self.roi.mask))

    @property
    def plane_bits(self) -> list[int]:
        return [8 * len(layer) for layer in self.layers]

    @property
    def payload_bits(self) -> int:
        return sum(self.plane_bits)

    def size_bits(self) -> int:
        return self.header_bits + self.rle_bits + self.payload_bits

    def bpp_total(self) -> float:
        return self.size_bits() / (self.width * self.height)

    def bpp_payload(self) -> float:
        return self.payload_bits / (self.width * self.height)

    # -- serialization --

    def to_bytes(self) -> bytes:
        parts = [POH_MAGIC, struct.pack("<HH", self.width, self.height)]
        if self.mode == MODE_BITPLANE:
            parts.append(struct.pack("<BB", MODE_BITPLANE, self.bits))
        else:
            parts.append(struct.pack("<BBH", MODE_LEVEL, 0, self.levels))
        parts.append(
            struct.pack(
                "<BBI", self.layer_count, self.fill_mode, self.fill_seed_or_value
            )
        )
        runs = _rle_encode(self.roi.mask)
        parts.append(runs.astype("<u4").tobytes())
        parts.extend(self.layers)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "PohBitstream":
        view = memoryview(blob)
        pos = 0

        def take(n):
            nonlocal pos
            if pos + n > len(view):
                raise PohStreamError("truncated stream")
            chunk = view[pos : pos + n]
            pos += n
            return chunk

        if bytes(take(4)) != POH_MAGIC:
            raise PohStreamError("bad magic (not a POH1 stream)")
        width, height = struct.unpack("<HH", take(4))
        if width == 0 or height == 0:
            raise PohStreamError("zero dimension")
        (mode,) = struct.unpack("<B", take(1))
        bits = levels = None
        if mode == MODE_BITPLANE:
            (bits,) = struct.unpack("<B", take(1))
        elif mode == MODE_LEVEL:
            (marker,) = struct.unpack("<B", take(1))
            if marker != 0:
                raise PohStreamError("bad level-mode marker")
            (levels,) = struct.unpack("<H", take(2))
        else:
            raise PohStreamError(f"unknown mode {mode}")
        layer_count, fill_mode = struct.unpack("<BB", take(2))
        (fill_seed_or_value,) = struct.unpack("<I", take(4))
        if fill_mode not in (FILL_CONSTANT, FILL_SEEDED_RANDOM):
            raise PohStreamError(f"unknown fill mode {fill_mode}")

        n = width * height
        runs = []
        total = 0
        while total < n:
            (run,) = struct.unpack("<I", take(4))
            runs.append(run)
            total += run
        roi = RoiMask(_rle_decode(np.asarray(runs, dtype=np.uint32), (height, width)))

        n_roi = roi.count
        layers = []
        for _ in range(layer_count):
            if mode == MODE_BITPLANE:
                nbytes = _plane_bytes(n_roi)
            else:
                nbytes = (_level_payload_bits(n_roi, levels) + 7) // 8
            layers.append(bytes(take(nbytes)))
        if pos != len(view):
            raise PohStreamError(f"{len(view) - pos} trailing bytes")
        return cls(
            width=width,
            height=height,
            mode=mode,
            layer_count=layer_count,
            fill_mode=fill_mode,
            fill_seed_or_value=fill_seed_or_value,
            roi=roi,
            layers=layers,
            bits=bits,
            levels=levels,
        )

    def write(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def read(cls, path) -> "PohBitstream":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


# --- encode / decode --------------------------------------------------------


def encode(
    poh: PhaseHologram,
    roi: RoiMask,
    bits: int,
    fill_mode: int = FILL_SEEDED_RANDOM,
    fill_seed_or_value: int = 0,
) -> PohBitstream:
    """Bit-plane encode the RoI pixels of a POH, MSB plane first."""
    if not 1 <= bits <= 8:
        raise ValueError("bit depth must lie in [1, 8]")
    if roi.mask.shape != poh.params.shape:
        raise ValueError("RoI dimensions do not match the hologram")
    coded = poh.samples.ravel()[roi.mask.ravel()]
    layers = []
    for k in range(bits):
        plane = (coded >> (7 - k)) & 1
        layers.append(np.packbits(plane).tobytes())
    return PohBitstream(
        width=poh.params.width,
        height=poh.params.height,
        mode=MODE_BITPLANE,
        layer_count=bits,
        fill_mode=fill_mode,
        fill_seed_or_value=fill_seed_or_value,
        roi=roi,
        layers=layers,
        bits=bits,
    )


def encode_levels(
    poh: PhaseHologram,
    roi: RoiMask,
    levels: int,
    fill_mode: int = FILL_SEEDED_RANDOM,
    fill_seed_or_value: int = 0,
    wrap: bool = False,
) -> PohBitstream:
    """L-level encode the RoI pixels; symbols packed base-L in groups of 32."""
    if roi.mask.shape != poh.params.shape:
        raise ValueError("RoI dimensions do not match the hologram")
    idx_lut, _ = _level_lut(levels, wrap)
    symbols = idx_lut[poh.samples.ravel()[roi.mask.ravel()]]
    payload = _pack_symbols(symbols, levels)
    return PohBitstream(
        width=poh.params.width,
        height=poh.params.height,
        mode=MODE_LEVEL,
        layer_count=1,
        fill_mode=fill_mode,
        fill_seed_or_value=fill_seed_or_value,
        roi=roi,
        layers=[payload],
        levels=levels,
    )


def _pack_symbols(symbols: np.ndarray, levels: int, group: int = 32) -> bytes:
    bit_chunks = []
    for start in range(0, len(symbols), group):
        chunk = symbols[start : start + group]
        g = len(chunk)
        nbits = (levels**g - 1).bit_length()
        value = 0
        for s in chunk:
            value = value * levels + int(s)
        raw = np.frombuffer(
            value.to_bytes((nbits + 7) // 8, "big"), dtype=np.uint8
        )
        bits = np.unpackbits(raw)[-nbits:] if nbits else np.zeros(0, np.uint8)
        bit_chunks.append(bits)
    if not bit_chunks:
        return b""
    return np.packbits(np.concatenate(bit_chunks)).tobytes()


def _unpack_symbols(payload: bytes, n: int, levels: int, group: int = 32) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))
    symbols = np.empty(n, dtype=np.int64)
    pos = 0
    for start in range(0, n, group):
        g = min(group, n - start)
        nbits = (levels**g - 1).bit_length()
        if pos + nbits > len(bits):
            raise PohStreamError("level payload too short")
        chunk = bits[pos : pos + nbits]
        pos += nbits
        value = int.from_bytes(np.packbits(chunk).tobytes(), "big") >> (
            (8 - nbits % 8) % 8
        )
        if value >= levels**g:
            raise PohStreamError("level payload symbol out of range")
        for i in range(g - 1, -1, -1):
            value, rem = divmod(value, levels)
            symbols[start + i] = rem
    return symbols


def decode(stream: PohBitstream, layers_available: int | None = None) -> PhaseHologram:
    """Reconstruct a POH from the first `layers_available` layers.

    Bit-plane streams use the truncation-cell midpoint for layers that have
    not arrived; non-RoI pixels are synthesized per the header fill mode.
    """
    if layers_available is None:
        layers_available = stream.layer_count
    if not 1 <= layers_available <= stream.layer_count:
        raise ValueError(
            f"layers_available {layers_available} outside [1, {stream.layer_count}]"
        )
    n_roi = stream.roi.count
    if stream.mode == MODE_BITPLANE:
        recon = np.zeros(n_roi, dtype=np.int64)
        for k in range(layers_available):
            plane = np.unpackbits(
                np.frombuffer(stream.layers[k], dtype=np.uint8)
            )[:n_roi]
            recon += plane.astype(np.int64) << (7 - k)
        if layers_available < 8:
            recon += 1 << (7 - layers_available)
    else:
        symbols = _unpack_symbols(stream.layers[0], n_roi, stream.levels)
        recon = quantization_levels(stream.levels)[symbols]

    flat = np.empty(stream.width * stream.height, dtype=np.uint8)
    roi_flat = stream.roi.mask.ravel()
    flat[roi_flat] = recon.astype(np.uint8)
    n_fill = flat.size - n_roi
    if n_fill:
        if stream.fill_mode == FILL_CONSTANT:
            flat[~roi_flat] = stream.fill_seed_or_value & 0xFF
        else:
            flat[~roi_flat] = _fill_bytes(stream.fill_seed_or_value, n_fill)
    params = SlmParams(width=stream.width, height=stream.height)
    return PhaseHologram(params, flat.reshape(stream.height, stream.width))


def roi_from_scene(
    scene: TargetScene, slm: SlmParams, sub: SubhologramParams
) -> RoiMask:
    """Union over layers of the scene support dilated by the sub-hologram
    radius at each layer's depth."""
    if scene.shape != slm.shape:
        raise ValueError("scene grid does not match SLM grid")
    mask = np.zeros(slm.shape, dtype=bool)
    for layer in scene.layers:
        sup = layer.amplitude > scene.support_threshold
        if not sup.any():
            continue
        r = sub.radius_px(layer.depth, slm)
        if r > 0:
            sup = ndimage.maximum_filter(sup, size=2 * r + 1, mode="constant")
        mask |= sup
    return RoiMask(mask)
