"""Map available wireless rate to codec decisions, simulate channel rate
traces, and allocate multi-user channels/streams.

The coded rate of one session is b * fps * eyes * rho * pixels_per_eye plus
a small container overhead; the bit depth b is chosen as the largest value
that fits the available rate, clamped by the SLM's effective modulation
depth (sending finer phase than the SLM can display buys nothing).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

#: Container overhead (header + RoI run-lengths) as a fraction of payload.
OVERHEAD_FACTOR = 0.02

WIFI_CHANNELS = 5
WIFI_SPATIAL_STREAMS = 8
WIFI_MAX_USERS = WIFI_CHANNELS * WIFI_SPATIAL_STREAMS


class CapacityError(RuntimeError):
    """More users requested than the 5 channels x 8 streams can carry."""


@dataclass(frozen=True)
class SessionConfig:
    """Per-user display session parameters."""

    fps: float = 60.0
    eyes: int = 2
    pixels_per_eye: int = 1920 * 1080
    slm_effective_bits: int = 4
    container_bits: int = 8

    def __post_init__(self):
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        if self.eyes not in (1, 2):
            raise ValueError("eyes must be 1 or 2")
        if not 1 <= self.slm_effective_bits <= 8:
            raise ValueError("slm_effective_bits must lie in [1, 8]")
        if self.container_bits != 8:
            raise ValueError("container depth is fixed at 8 bits")
        if self.pixels_per_eye <= 0:
            raise ValueError("pixels_per_eye must be positive")


@dataclass(frozen=True)
class ChannelModel:
    """Bounded reflected random walk standing in for a WLAN channel."""

    min_mbps: float = 60.0
    max_mbps: float = 200.0
    update_interval_s: float = 1.0 / 60.0
    step_mbps: float = 5.0
    seed: int = 0
    initial_mbps: float | None = None

    def __post_init__(self):
        if self.min_mbps < 0 or self.min_mbps > self.max_mbps:
            raise ValueError("need 0 <= min rate <= max rate")
        if self.update_interval_s <= 0:
            raise ValueError("update interval must be positive")
        if self.step_mbps < 0:
            raise ValueError("walk step must be nonnegative")

    @property
    def start_mbps(self) -> float:
        if self.initial_mbps is not None:
            return self.initial_mbps
        return 0.5 * (self.min_mbps + self.max_mbps)


@dataclass
class CodingDecision:
    """One rate-control outcome: bit depth, layers and the predicted rate."""

    bits: int
    roi_fraction: float
    layers_sent: int
    predicted_mbps: float
    rate_infeasible: bool = False


def _per_bit_rate_bps(rho: float, cfg: SessionConfig) -> float:
    return cfg.fps * cfg.eyes * rho * cfg.pixels_per_eye


def select_coding_params(
    available_mbps: float, rho: float, cfg: SessionConfig
) -> CodingDecision:
    """Choose the largest bit depth whose coded rate fits the channel.

    b = floor(available / per-bit-rate) clamped to [1, slm_effective_bits];
    the overhead factor is folded into the selection so the predicted rate
    (which includes it) never exceeds the available rate.  When even b = 1
    does not fit, the decision is flagged rate-infeasible and the caller
    drops frame rate or shrinks the RoI.
    """
    if available_mbps <= 0:
        raise ValueError("available rate must be positive")
    if not 0.0 < rho <= 1.0:
        raise ValueError("RoI fraction must lie in (0, 1]")
    per_bit = _per_bit_rate_bps(rho, cfg) * (1.0 + OVERHEAD_FACTOR)
    raw = math.floor(available_mbps * 1e6 / per_bit)
    ceiling = min(8, cfg.slm_effective_bits)
    bits = max(1, min(raw, ceiling))
    infeasible = raw < 1
    predicted = bits * per_bit / 1e6
    return CodingDecision(
        bits=bits,
        roi_fraction=rho,
        layers_sent=bits,
        predicted_mbps=predicted,
        rate_infeasible=infeasible,
    )


# tiny haircut keeping the feasibility helpers strictly inside the region
# (an exact boundary value can round to infeasible in the floor selection)
_FEASIBLE_MARGIN = 1.0 - 1e-9


def feasible_fps(available_mbps: float, rho: float, cfg: SessionConfig) -> float:
    """Highest frame rate at which b = 1 still fits the available rate."""
    per_frame_bits = cfg.eyes * rho * cfg.pixels_per_eye * (1.0 + OVERHEAD_FACTOR)
    return available_mbps * 1e6 / per_frame_bits * _FEASIBLE_MARGIN


def feasible_roi_fraction(available_mbps: float, cfg: SessionConfig) -> float:
    """Largest RoI fraction at which b = 1 still fits at the configured fps."""
    per_rho_bits = cfg.fps * cfg.eyes * cfg.pixels_per_eye * (1.0 + OVERHEAD_FACTOR)
    return min(1.0, available_mbps * 1e6 / per_rho_bits * _FEASIBLE_MARGIN)


@dataclass(frozen=True)
class CompressionSummary:
    uncompressed_mbps: float
    compressed_mbps: float
    ratio: float


def compression_summary(decision: CodingDecision, cfg: SessionConfig) -> CompressionSummary:
    """Raw (overhead-free) uncompressed vs compressed rate and their ratio."""
    uncompressed = cfg.container_bits * cfg.fps * cfg.eyes * cfg.pixels_per_eye
    compressed = decision.bits * decision.roi_fraction * cfg.fps * cfg.eyes * cfg.pixels_per_eye
    return CompressionSummary(
        uncompressed_mbps=uncompressed / 1e6,
        compressed_mbps=compressed / 1e6,
        ratio=uncompressed / compressed,
    )


def simulate_channel(model: ChannelModel, duration_s: float) -> np.ndarray:
    """Per-interval available rate in Mbit/s; deterministic for a seed.

    A reflected uniform random walk: each interval moves by U(-step, step)
    and folds back into [min, max].
    """
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    n = max(1, math.ceil(duration_s / model.update_interval_s))
    rng = np.random.default_rng(model.seed)
    trace = np.empty(n, dtype=np.float64)
    rate = float(np.clip(model.start_mbps, model.min_mbps, model.max_mbps))
    width = model.max_mbps - model.min_mbps
    for i in range(n):
        trace[i] = rate
        if model.step_mbps == 0 or width == 0:
            continue
        rate += rng.uniform(-model.step_mbps, model.step_mbps)
        # reflect into the band
        excursion = math.fmod(rate - model.min_mbps, 2 * width)
        if excursion < 0:
            excursion += 2 * width
        rate = model.min_mbps + (excursion if excursion <= width else 2 * width - excursion)
    return trace


def allocate_users(n: int) -> list[tuple[int, int]]:
    """Unique (channel, spatial stream) pairs, channels filled round-robin."""
    if n < 0:
        raise ValueError("user count must be nonnegative")
    if n > WIFI_MAX_USERS:
        raise CapacityError(
            f"{n} users exceed the {WIFI_CHANNELS} x {WIFI_SPATIAL_STREAMS} "
            f"= {WIFI_MAX_USERS} capacity"
        )
    return [(i % WIFI_CHANNELS, i // WIFI_CHANNELS) for i in range(n)]


@dataclass
class FrameLogEntry:
    frame_index: int
    t_seconds: float
    rate_mbps: float
    roi_fraction: float
    bits: int
    bpp_total: float
    psnr_db: float


def write_session_csv(log: list[FrameLogEntry], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["frame_index", "t_seconds", "rate_mbps", "roi_fraction", "bits", "bpp_total", "psnr_db"]
        )
        for e in log:
            writer.writerow(
                [
                    e.frame_index,
                    f"{e.t_seconds:.6f}",
                    f"{e.rate_mbps:.6f}",
                    f"{e.roi_fraction:.6f}",
                    e.bits,
                    f"{e.bpp_total:.6f}",
                    f"{e.psnr_db:.4f}",
                ]
            )


def run_session(
    scene,
    cfg: SessionConfig,
    model: ChannelModel,
    duration_s: float,
    slm=None,
    sub=None,
    seed: int = 0,
    fidoc_iterations: int = 30,
) -> list[FrameLogEntry]:
    """End-to-end adaptation loop over one simulated channel trace.

    Generates the scene's POH once (static content), then per displayed
    frame samples the channel, picks coding parameters, bit-plane codes the
    RoI, decodes, reconstructs and logs PSNR.  Decisions repeat across
    frames with equal rate, so codec work is memoized per bit depth.
    """
    from . import evaluation, pohcodec
    from .cgh import generate_complex_hologram
    from .phase_retrieval import FidocConfig, fidoc
    from .wavefield import PhaseHologram, SlmParams

    if slm is None:
        side = int(math.sqrt(cfg.pixels_per_eye))
        if side * side != cfg.pixels_per_eye:
            raise ValueError("supply SlmParams explicitly for non-square grids")
        slm = SlmParams(width=side, height=side)
    if sub is None:
        sub = pohcodec.SubhologramParams()

    holo = generate_complex_hologram(scene, slm, seed)
    poh, _ = fidoc(holo, scene, FidocConfig(iterations=fidoc_iterations))
    roi = pohcodec.roi_from_scene(scene, slm, sub)
    if roi.count == 0:
        roi = pohcodec.RoiMask.full(slm.shape)
    depth = scene.dominant_layer().depth

    trace = simulate_channel(model, duration_s)
    n_frames = int(round(duration_s * cfg.fps))
    cache: dict[int, tuple[float, float]] = {}
    log = []
    for i in range(n_frames):
        t = i / cfg.fps
        rate = float(trace[min(int(t / model.update_interval_s), len(trace) - 1)])
        decision = select_coding_params(rate, roi.rho, cfg)
        if decision.bits not in cache:
            stream = pohcodec.encode(poh, roi, decision.bits, fill_seed_or_value=seed)
            decoded = PhaseHologram(poh.params, pohcodec.decode(stream, decision.layers_sent).samples)
            psnr = evaluation.reconstruction_psnr(poh, decoded, depth)
            cache[decision.bits] = (stream.bpp_total(), psnr)
        bpp, psnr = cache[decision.bits]
        log.append(
            FrameLogEntry(
                frame_index=i,
                t_seconds=t,
                rate_mbps=rate,
                roi_fraction=roi.rho,
                bits=decision.bits,
                bpp_total=bpp,
                psnr_db=psnr,
            )
        )
    return log
