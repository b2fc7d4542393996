"""Quantitative evaluation: numerical reconstruction PSNR, depth sweeps and
rate-distortion tables.

Quality of a coded POH is measured against the reconstruction of the
uncompressed POH at the same focus depth: both intensities are scaled by the
reference maximum and compared with MSE over all pixels.  Identical inputs
(and anything above it) report the 99 dB sentinel cap so CSVs stay numeric.
"""

from __future__ import annotations

import concurrent.futures
import csv
import math
import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import baselines, pohcodec
from .cgh import SceneLayer, TargetScene, load_scene
from .images import read_pgm, write_pgm, write_png_gray
from .phase_retrieval import FidocConfig, default_signal_mask, fidoc
from .scenes import builtin_scene
from .wavefield import (
    PhaseHologram,
    SlmParams,
    intensity,
    phase_to_field,
    propagate,
)

PSNR_CAP_DB = 99.0


@dataclass(frozen=True)
class RdPoint:
    """One rate-distortion measurement."""

    method: str
    bpp: float
    psnr_db: float
    depth_m: float
    seed: int

    def __post_init__(self):
        if self.bpp <= 0:
            raise ValueError("bpp must be positive")
        if not math.isfinite(self.psnr_db):
            raise ValueError("psnr must be finite")


@dataclass(frozen=True)
class MethodSpec:
    """A codec under test with its rate ladder.

    kind is one of 'identity', 'pcm' (ladder = level counts), 'bitplane'
    (ladder = bit depths), 'dct-flat' / 'dct-default' (ladder = target bpp),
    'unwrap-dct' (block-unwrap then flat DCT at target bpp), or 'external'
    (encode/decode command templates on PGM files, ladder = rate params).
    """

    kind: str
    ladder: tuple = ()
    name: str | None = None
    encode_cmd: str | None = None
    decode_cmd: str | None = None

    def __post_init__(self):
        kinds = ("identity", "pcm", "bitplane", "dct-flat", "dct-default", "unwrap-dct", "external")
        if self.kind not in kinds:
            raise ValueError(f"unknown method kind '{self.kind}'")
        if self.kind == "external" and not (self.encode_cmd and self.decode_cmd):
            raise ValueError("external methods need encode and decode commands")

    def label(self, rate) -> str:
        base = self.name or self.kind
        if self.kind == "identity":
            return base
        if self.kind == "pcm":
            return f"{base}-L{rate}"
        if self.kind == "bitplane":
            return f"{base}-b{rate}"
        return f"{base}-{rate}"


def _default_depths() -> tuple:
    return tuple(float(z) for z in np.geomspace(0.25, 5.0, 12))


def _default_methods() -> tuple:
    return (MethodSpec("identity"), MethodSpec("pcm", (2, 4, 8, 16, 32)))


@dataclass(frozen=True)
class SweepConfig:
    """Depths, seeds and methods for one rate-distortion sweep."""

    depths: tuple = field(default_factory=_default_depths)
    seeds: tuple = (1, 2, 3)
    methods: tuple = field(default_factory=_default_methods)
    fidoc_iterations: int = 30
    fidoc_beta: float = 0.5

    def __post_init__(self):
        for z in self.depths:
            if not 0.25 <= z <= 5.0:
                raise ValueError("sweep depths must lie in [0.25, 5.0] m")
        if not self.depths or not self.seeds or not self.methods:
            raise ValueError("sweep needs depths, seeds and methods")


def reconstruction_psnr(
    reference: PhaseHologram,
    test: PhaseHologram,
    depth_m: float,
    fourier_aperture: float | None = None,
) -> float:
    """PSNR between numerical reconstructions of two POHs at one depth.

    `fourier_aperture` views both reconstructions through a circular pupil
    (fraction of Nyquist), for eye-box-limited evaluation.
    """
    if reference.params.shape != test.params.shape:
        raise ValueError("holograms are on different grids")
    i_ref = intensity(
        propagate(phase_to_field(reference), depth_m, fourier_aperture=fourier_aperture)
    ).values
    i_test = intensity(
        propagate(phase_to_field(test), depth_m, fourier_aperture=fourier_aperture)
    ).values
    peak = i_ref.max()
    scale = 1.0 / peak if peak > 0 else 1.0
    mse = float(np.mean((i_ref * scale - i_test * scale) ** 2))
    if mse == 0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(1.0 / mse), PSNR_CAP_DB)


def target_psnr(
    poh: PhaseHologram,
    scene: TargetScene,
    region: str = "signal",
    mask_dilation: int = 8,
    fourier_aperture: float | None = None,
) -> float:
    """Fidelity of a POH's reconstruction to the scene's target intensity.

    The reconstruction is compared to the dominant layer's amplitude^2 over
    a region ('signal' = dilated support minus guard band, 'support', or
    'full') after a least-squares gain fit, so it measures content quality
    rather than absolute brightness.
    """
    layer = scene.dominant_layer()
    target = layer.amplitude**2
    tmax = target.max()
    if tmax > 0:
        target = target / tmax
    recon = intensity(
        propagate(phase_to_field(poh), layer.depth, fourier_aperture=fourier_aperture)
    ).values
    if region == "signal":
        mask = default_signal_mask(scene, mask_dilation)
    elif region == "support":
        mask = scene.support()
    elif region == "full":
        mask = np.ones(scene.shape, dtype=bool)
    else:
        raise ValueError("region must be 'signal', 'support' or 'full'")
    if not mask.any():
        return PSNR_CAP_DB
    r = recon[mask]
    t = target[mask]
    denom = float(np.sum(r * r))
    gain = float(np.sum(r * t)) / denom if denom > 0 else 1.0
    mse = float(np.mean((gain * r - t) ** 2))
    if mse == 0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(1.0 / mse), PSNR_CAP_DB)


# --- method execution ---------------------------------------------------------


def _scene_at_depth(scene: TargetScene, depth_m: float) -> TargetScene:
    layers = [SceneLayer(la.amplitude, depth_m) for la in scene.layers]
    return TargetScene(layers, scene.support_threshold)


def make_poh(
    scene: TargetScene,
    slm: SlmParams,
    seed: int,
    iterations: int = 30,
    beta: float = 0.5,
) -> PhaseHologram:
    """CGH generation plus phase retrieval: the sweep's inner pipeline."""
    from .cgh import generate_complex_hologram

    holo = generate_complex_hologram(scene, slm, seed)
    poh, _ = fidoc(holo, scene, FidocConfig(iterations=iterations, beta=beta))
    return poh


def _run_method_point(
    spec: MethodSpec, rate, poh: PhaseHologram, depth_m: float, seed: int
) -> RdPoint:
    n = poh.params.npixels
    full = pohcodec.RoiMask.full(poh.params.shape)
    if spec.kind == "identity":
        return RdPoint(spec.label(rate), 8.0, PSNR_CAP_DB, depth_m, seed)
    if spec.kind == "pcm":
        stream = pohcodec.encode_levels(poh, full, int(rate))
        decoded = PhaseHologram(poh.params, pohcodec.decode(stream).samples)
        psnr = reconstruction_psnr(poh, decoded, depth_m)
        return RdPoint(spec.label(rate), stream.bpp_total(), psnr, depth_m, seed)
    if spec.kind == "bitplane":
        stream = pohcodec.encode(poh, full, int(rate))
        decoded = PhaseHologram(poh.params, pohcodec.decode(stream).samples)
        psnr = reconstruction_psnr(poh, decoded, depth_m)
        return RdPoint(spec.label(rate), stream.bpp_total(), psnr, depth_m, seed)
    if spec.kind in ("dct-flat", "dct-default"):
        scheme = "flat" if spec.kind == "dct-flat" else "default"
        _, blob = baselines.match_rate(poh.samples, float(rate), scheme)
        decoded = PhaseHologram(poh.params, baselines.dct_decode(blob))
        psnr = reconstruction_psnr(poh, decoded, depth_m)
        return RdPoint(spec.label(rate), len(blob) * 8 / n, psnr, depth_m, seed)
    if spec.kind == "unwrap-dct":
        counts, _ = baselines.unwrap_to_counts(poh, "block", 10)
        _, blob = baselines.match_rate(
            counts.astype(np.uint16), float(rate), "flat", sample_bits=10
        )
        rec = baselines.dct_decode(blob)
        decoded = baselines.rewrap_counts_to_poh(rec, poh)
        psnr = reconstruction_psnr(poh, decoded, depth_m)
        return RdPoint(spec.label(rate), len(blob) * 8 / n, psnr, depth_m, seed)
    if spec.kind == "external":
        bpp, decoded = _run_external(spec, rate, poh)
        psnr = reconstruction_psnr(poh, decoded, depth_m)
        return RdPoint(spec.label(rate), bpp, psnr, depth_m, seed)
    raise AssertionError(spec.kind)


def _run_external(spec: MethodSpec, rate, poh: PhaseHologram):
    """Round-trip through user-supplied encode/decode commands on PGM files."""
    with tempfile.TemporaryDirectory(prefix="pohlab-ext-") as tmp:
        src = os.path.join(tmp, "in.pgm")
        coded = os.path.join(tmp, "coded.bin")
        out = os.path.join(tmp, "out.pgm")
        write_pgm(src, poh.samples)
        enc = [
            part.format(input=src, output=coded, rate=rate)
            for part in shlex.split(spec.encode_cmd)
        ]
        subprocess.run(enc, check=True, capture_output=True)
        size_bits = os.path.getsize(coded) * 8
        dec = [
            part.format(input=coded, output=out, rate=rate)
            for part in shlex.split(spec.decode_cmd)
        ]
        subprocess.run(dec, check=True, capture_output=True)
        samples, _ = read_pgm(out)
    if samples.shape != poh.params.shape:
        raise ValueError(f"external codec changed dimensions to {samples.shape}")
    return size_bits / poh.params.npixels, PhaseHologram(poh.params, samples.astype(np.uint8))


def _sweep_cell(args) -> list[RdPoint]:
    scene, slm, sweep, depth, seed = args
    cell_scene = _scene_at_depth(scene, depth)
    poh = make_poh(cell_scene, slm, seed, sweep.fidoc_iterations, sweep.fidoc_beta)
    points = []
    for spec in sweep.methods:
        ladder = spec.ladder if spec.kind != "identity" else (None,)
        for rate in ladder:
            points.append(_run_method_point(spec, rate, poh, depth, seed))
    return points


@dataclass(frozen=True)
class RdAggregate:
    """Depth statistics for one method rung."""

    method: str
    bpp_mean: float
    psnr_mean: float
    psnr_std: float
    n_points: int


def aggregate_points(points: list[RdPoint]) -> list[RdAggregate]:
    by_method: dict[str, list[RdPoint]] = {}
    for p in points:
        by_method.setdefault(p.method, []).append(p)
    aggs = []
    for method in sorted(by_method):
        ps = by_method[method]
        psnrs = np.array([p.psnr_db for p in ps])
        bpps = np.array([p.bpp for p in ps])
        aggs.append(
            RdAggregate(
                method=method,
                bpp_mean=float(bpps.mean()),
                psnr_mean=float(psnrs.mean()),
                psnr_std=float(psnrs.std()),
                n_points=len(ps),
            )
        )
    return aggs


def rd_sweep(
    scene: TargetScene,
    sweep: SweepConfig,
    slm: SlmParams | None = None,
    workers: int | None = None,
) -> tuple[list[RdPoint], list[RdAggregate]]:
    """Run every (method, rate, depth, seed) cell and aggregate per method.

    Cells are independent and run across processes when workers > 1; the
    merged point list is sorted by (method, depth, seed) so results are
    deterministic regardless of scheduling.
    """
    if slm is None:
        h, w = scene.shape
        slm = SlmParams(width=w, height=h)
    if workers is None:
        workers = _default_workers()
    cells = [(scene, slm, sweep, depth, seed) for depth in sweep.depths for seed in sweep.seeds]
    if workers <= 1 or len(cells) == 1:
        results = [_sweep_cell(c) for c in cells]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, cells))
    points = [p for cell in results for p in cell]
    points.sort(key=lambda p: (p.method, p.depth_m, p.seed))
    return points, aggregate_points(points)


def _default_workers() -> int:
    env = os.environ.get("POHLAB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# --- emitters -------------------------------------------------------------


RD_CSV_COLUMNS = ("method", "bpp", "psnr_db", "depth_m", "seed")


def emit_rd_csv(points: list[RdPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RD_CSV_COLUMNS)
        for p in points:
            writer.writerow(
                [p.method, f"{p.bpp:.9g}", f"{p.psnr_db:.9g}", f"{p.depth_m:.9g}", p.seed]
            )


def read_rd_csv(path) -> list[RdPoint]:
    points = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != RD_CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        for row in reader:
            points.append(
                RdPoint(row[0], float(row[1]), float(row[2]), float(row[3]), int(row[4]))
            )
    return points


def emit_reconstruction_png(poh: PhaseHologram, depth_m: float, path) -> None:
    """Tone-mapped (linear to max) 8-bit PNG of the reconstruction."""
    img = intensity(propagate(phase_to_field(poh), depth_m)).values
    peak = img.max()
    if peak > 0:
        img = img / peak
    write_png_gray(path, np.round(img * 255.0).astype(np.uint8))


# --- sweep config files -----------------------------------------------------


def parse_sweep_config(path) -> tuple[dict, SweepConfig]:
    """Parse a key = value sweep description.

    Recognized keys: scene (builtin:name or an image path), grid, pitch,
    wavelength, depth, threshold, depths, seeds, fidoc-iters, fidoc-beta and
    one `method = kind args...` line per method.  Returns (scene options,
    SweepConfig); the caller materializes the scene.
    """
    opts = {
        "scene": "builtin:twocards",
        "grid": 512,
        "pitch": 8e-6,
        "wavelength": 638e-9,
        "depth": 0.5,
        "threshold": 0.05,
    }
    depths: tuple = _default_depths()
    seeds: tuple = (1, 2, 3)
    methods: list[MethodSpec] = []
    iters, beta = 30, 0.5
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            key = key.strip().lower()
            tokens = shlex.split(value.strip())
            if not tokens:
                raise ValueError(f"{path}:{lineno}: empty value for {key}")
            if key == "scene":
                opts["scene"] = tokens[0]
            elif key == "grid":
                opts["grid"] = int(tokens[0])
            elif key == "pitch":
                opts["pitch"] = float(tokens[0])
            elif key == "wavelength":
                opts["wavelength"] = float(tokens[0])
            elif key == "depth":
                opts["depth"] = float(tokens[0])
            elif key == "threshold":
                opts["threshold"] = float(tokens[0])
            elif key == "depths":
                depths = tuple(float(t) for t in tokens)
            elif key == "seeds":
                seeds = tuple(int(t) for t in tokens)
            elif key == "fidoc-iters":
                iters = int(tokens[0])
            elif key == "fidoc-beta":
                beta = float(tokens[0])
            elif key == "method":
                methods.append(_parse_method(tokens, f"{path}:{lineno}"))
            else:
                raise ValueError(f"{path}:{lineno}: unknown key '{key}'")
    if not methods:
        methods = [MethodSpec("pcm", (2, 4, 8, 16, 32))]
    sweep = SweepConfig(
        depths=depths,
        seeds=seeds,
        methods=tuple(methods),
        fidoc_iterations=iters,
        fidoc_beta=beta,
    )
    return opts, sweep


def _parse_method(tokens: list[str], where: str) -> MethodSpec:
    kind = tokens[0]
    if kind == "identity":
        return MethodSpec("identity")
    if kind == "external":
        if len(tokens) < 5:
            raise ValueError(f"{where}: external needs name, 2 commands and rates")
        rates = tuple(_number(t) for t in tokens[4:])
        return MethodSpec(
            "external",
            rates,
            name=tokens[1],
            encode_cmd=tokens[2],
            decode_cmd=tokens[3],
        )
    if kind in ("pcm", "bitplane"):
        return MethodSpec(kind, tuple(int(t) for t in tokens[1:]))
    if kind in ("dct-flat", "dct-default", "unwrap-dct"):
        return MethodSpec(kind, tuple(float(t) for t in tokens[1:]))
    raise ValueError(f"{where}: unknown method kind '{kind}'")


def _number(token: str):
    try:
        return int(token)
    except ValueError:
        return float(token)


def scene_from_spec(spec: str, slm: SlmParams, depth: float, threshold: float) -> TargetScene:
    """Materialize a scene from 'builtin:<name>' or a grayscale image path."""
    if spec.startswith("builtin:"):
        return builtin_scene(spec.split(":", 1)[1], slm, depth=depth, threshold=threshold)
    return load_scene(spec, depth, threshold, slm)
