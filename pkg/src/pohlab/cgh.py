"""Target AR scenes (amplitude + depth layers) and complex Fresnel hologram
generation.

A scene layer is an amplitude image on the SLM grid at one depth.  Hologram
generation assigns a seeded random diffuser phase to each layer, back-
propagates it to the SLM plane and sums the layers.  No occlusion handling:
the evaluation regime keeps the whole frame at a single depth and multi-layer
scenes are a convenience.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .images import read_grayscale
from .wavefield import TWO_PI, ComplexField, SlmParams, propagate

#: Pixels around the frame kept black by the bundled content; the retrieval
#: don't-care region always includes this band.
GUARD_BAND = 32

DEPTH_MIN_M = 0.25
DEPTH_MAX_M = 5.0


@dataclass
class SceneLayer:
    """One amplitude image at one depth."""

    amplitude: np.ndarray
    depth: float

    def __post_init__(self):
        self.amplitude = np.asarray(self.amplitude, dtype=np.float64)
        if self.amplitude.ndim != 2:
            raise ValueError("layer amplitude must be a 2-D image")
        if self.amplitude.min() < 0 or self.amplitude.max() > 1:
            raise ValueError("layer amplitude must lie in [0, 1]")
        if not DEPTH_MIN_M <= self.depth <= DEPTH_MAX_M:
            raise ValueError(
                f"depth {self.depth} m outside [{DEPTH_MIN_M}, {DEPTH_MAX_M}] m"
            )

    def energy(self) -> float:
        return float(np.sum(self.amplitude**2))


@dataclass
class TargetScene:
    """AR content to display: one or more layers plus a support threshold."""

    layers: list[SceneLayer] = field(default_factory=list)
    support_threshold: float = 0.05

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a scene needs at least one layer")
        if not 0.0 <= self.support_threshold <= 1.0:
            raise ValueError("support threshold must lie in [0, 1]")
        shape = self.layers[0].amplitude.shape
        for layer in self.layers[1:]:
            if layer.amplitude.shape != shape:
                raise ValueError("all layers must share one grid")

    @property
    def shape(self) -> tuple[int, int]:
        return self.layers[0].amplitude.shape

    def support(self) -> np.ndarray:
        """Union over layers of pixels with amplitude above the threshold."""
        mask = np.zeros(self.shape, dtype=bool)
        for layer in self.layers:
            mask |= layer.amplitude > self.support_threshold
        return mask

    def dominant_layer(self) -> SceneLayer:
        """The layer carrying the most energy (projection plane for retrieval)."""
        return max(self.layers, key=lambda la: la.energy())


def _center_on_grid(image: np.ndarray, params: SlmParams) -> np.ndarray:
    h, w = image.shape
    gh, gw = params.shape
    if h > gh or w > gw:
        raise ValueError(f"image {w}x{h} larger than SLM grid {gw}x{gh}")
    out = np.zeros((gh, gw), dtype=np.float64)
    top, left = (gh - h) // 2, (gw - w) // 2
    out[top : top + h, left : left + w] = image
    return out


def load_scene(
    image_path,
    depth: float,
    threshold: float,
    params: SlmParams,
) -> TargetScene:
    """Load an 8/16-bit grayscale image (PGM or PNG) as a single-depth scene.

    Pixel values are normalized by the file's maxval and the image is
    centered on the SLM grid with zero padding.
    """
    samples, maxval = read_grayscale(image_path)
    amplitude = _center_on_grid(samples.astype(np.float64) / maxval, params)
    return TargetScene([SceneLayer(amplitude, depth)], threshold)


def load_scene_with_depthmap(
    image_path,
    depthmap_path,
    z_min: float,
    z_max: float,
    n_layers: int,
    threshold: float,
    params: SlmParams,
) -> TargetScene:
    """Load amplitude plus an 8-bit depth map, bucketed into n_layers layers.

    Depth-map values map linearly onto [z_min, z_max]; each bucket becomes
    one layer at its center depth, masked to the bucket's pixels.
    """
    if n_layers < 1:
        raise ValueError("n_layers must be >= 1")
    if not z_min < z_max:
        raise ValueError("need z_min < z_max")
    samples, maxval = read_grayscale(image_path)
    dsamples, dmax = read_grayscale(depthmap_path)
    if dsamples.shape != samples.shape:
        raise ValueError("depth map dimensions must match the image")
    amplitude = samples.astype(np.float64) / maxval
    z = z_min + dsamples.astype(np.float64) / dmax * (z_max - z_min)
    edges = np.linspace(z_min, z_max, n_layers + 1)
    layers = []
    for i in range(n_layers):
        hi_inclusive = z <= edges[i + 1] if i == n_layers - 1 else z < edges[i + 1]
        bucket = (z >= edges[i]) & hi_inclusive & (amplitude > 0)
        if not bucket.any():
            continue
        layers.append(
            SceneLayer(
                _center_on_grid(np.where(bucket, amplitude, 0.0), params),
                0.5 * (edges[i] + edges[i + 1]),
            )
        )
    if not layers:
        layers = [
            SceneLayer(
                _center_on_grid(amplitude, params), 0.5 * (z_min + z_max)
            )
        ]
    return TargetScene(layers, threshold)


def generate_complex_hologram(
    scene: TargetScene,
    params: SlmParams,
    seed: int,
    aperture_fraction: float | None = None,
) -> ComplexField:
    """Sum of layers back-propagated to the SLM plane with diffuser phase.

    Each layer gets an i.i.d. uniform [0, 2*pi) phase drawn from a generator
    freshly seeded with `seed`, so identical layers produce identical
    diffusers and the result is bit-reproducible.

    `aperture_fraction` (of the Nyquist frequency) optionally band-limits
    the back-propagation, confining each object point's light to its
    eye-box sub-hologram instead of the whole SLM; the default diffuser
    path spreads energy over the full grid.
    """
    if scene.shape != params.shape:
        raise ValueError("scene grid does not match SLM grid")
    total = np.zeros(params.shape, dtype=np.complex128)
    for layer in scene.layers:
        if not layer.amplitude.any():
            continue
        rng = np.random.default_rng(seed)
        diffuser = rng.uniform(0.0, TWO_PI, size=params.shape)
        u0 = ComplexField(params, layer.amplitude * np.exp(1j * diffuser))
        total += propagate(u0, -layer.depth, fourier_aperture=aperture_fraction).data
    return ComplexField(params, total)
