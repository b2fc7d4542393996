"""Gerchberg-Saxton-type conversion of a complex hologram into an 8-bit
phase-only hologram, with don't-care regions and amplitude feedback.

Each iteration propagates the current phase-only field to the projection
plane, re-imposes the target amplitude inside the signal region (with
feedback weight beta), leaves the don't-care region untouched, and takes the
phase of the back-propagated field.  With beta = 0 this is the classic
alternating-projection scheme whose signal-region error is non-increasing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .cgh import GUARD_BAND, TargetScene
from .wavefield import TWO_PI, ComplexField, PhaseHologram, propagate


@dataclass
class FidocConfig:
    """Iteration budget, feedback weight and signal region for retrieval.

    signal_mask may be None, in which case the default mask (dilated scene
    support minus the guard band) is built from the scene.
    """

    iterations: int = 30
    beta: float = 0.5
    signal_mask: np.ndarray | None = None
    quantize_each_iter: bool = False
    mask_dilation: int = 8

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("need at least one iteration")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("feedback weight must lie in [0, 1]")
        if self.signal_mask is not None:
            self.signal_mask = np.asarray(self.signal_mask, dtype=bool)


@dataclass
class RetrievalTrace:
    """Per-iteration RMS amplitude error over the signal region."""

    rmse: list[float]

    def __len__(self) -> int:
        return len(self.rmse)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "rmse"])
            for i, v in enumerate(self.rmse):
                writer.writerow([i, f"{v:.9g}"])


def default_signal_mask(scene: TargetScene, dilation: int) -> np.ndarray:
    """Scene support dilated by a square element; guard band always excluded."""
    if dilation < 0:
        raise ValueError("dilation must be >= 0")
    mask = scene.support()
    if dilation > 0 and mask.any():
        mask = ndimage.maximum_filter(mask, size=2 * dilation + 1, mode="constant")
    mask[:GUARD_BAND, :] = False
    mask[-GUARD_BAND:, :] = False
    mask[:, :GUARD_BAND] = False
    mask[:, -GUARD_BAND:] = False
    return mask


def _quantize_phase(phi: np.ndarray) -> np.ndarray:
    """Snap phase to the 8-bit code lattice 2*pi*p/256, p in 0..255."""
    p = np.mod(np.round(np.mod(phi, TWO_PI) * (256.0 / TWO_PI)), 256)
    return p * (TWO_PI / 256.0)


def fidoc(
    hologram: ComplexField,
    scene: TargetScene,
    cfg: FidocConfig,
) -> tuple[PhaseHologram, RetrievalTrace]:
    """Convert a complex hologram to a display-ready POH.

    Parameters
    ----------
    hologram : ComplexField
        Complex hologram at the SLM plane; seeds the initial phase.
    scene : TargetScene
        Supplies the target amplitude and projection depth (the dominant
        layer's, for multi-layer scenes).
    cfg : FidocConfig
        Iterations, feedback, signal mask.

    Returns
    -------
    (PhaseHologram, RetrievalTrace)
        The 8-bit POH (quantized once after the final iteration unless
        cfg.quantize_each_iter) and the signal-region RMSE per iteration.
    """
    params = hologram.params
    if scene.shape != params.shape:
        raise ValueError("scene grid does not match hologram grid")
    layer = scene.dominant_layer()
    target = layer.amplitude
    z = layer.depth
    mask = (
        cfg.signal_mask
        if cfg.signal_mask is not None
        else default_signal_mask(scene, cfg.mask_dilation)
    )
    if mask.shape != params.shape:
        raise ValueError("signal mask does not match hologram grid")

    phi = np.angle(hologram.data)
    if cfg.quantize_each_iter:
        phi = _quantize_phase(phi)
    trace = []
    target_masked = target[mask]
    for _ in range(cfg.iterations):
        u = propagate(ComplexField(params, np.exp(1j * phi)), z)
        mag = np.abs(u.data)
        if mask.any():
            err = mag[mask] - target_masked
            trace.append(float(np.sqrt(np.mean(err**2))))
            new_amp = np.maximum(
                target_masked + cfg.beta * (target_masked - mag[mask]), 0.0
            )
            data = u.data
            sel = data[mask]
            nonzero = np.abs(sel) > 0
            unit = np.where(nonzero, sel / np.where(nonzero, np.abs(sel), 1.0), 1.0)
            data[mask] = new_amp * unit
        else:
            trace.append(0.0)
        phi = np.angle(propagate(u, -z).data)
        if cfg.quantize_each_iter:
            phi = _quantize_phase(phi)

    samples = np.mod(np.round(np.mod(phi, TWO_PI) * (256.0 / TWO_PI)), 256).astype(
        np.uint8
    )
    return PhaseHologram(params, samples), RetrievalTrace(trace)
