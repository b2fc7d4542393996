"""Bundled synthetic AR test content: sparse info cards and symbology on a
black background, plus a full-frame texture for distribution tests.

All scenes are generated procedurally on the SLM grid so the package ships
no image assets; geometry scales with the grid and keeps the 32-pixel guard
band black.
"""

from __future__ import annotations

import numpy as np

from .cgh import GUARD_BAND, SceneLayer, TargetScene
from .wavefield import SlmParams

BUILTIN_SCENES = ("twocards", "symbology", "fullframe")


def _card(canvas: np.ndarray, top: int, left: int, h: int, w: int) -> None:
    """Draw an info-card glyph: bright frame, title bar, body text lines."""
    frame = 2
    canvas[top : top + h, left : left + w] = 0.25
    canvas[top : top + frame, left : left + w] = 1.0
    canvas[top + h - frame : top + h, left : left + w] = 1.0
    canvas[top : top + h, left : left + frame] = 1.0
    canvas[top : top + h, left + w - frame : left + w] = 1.0
    # title bar
    bar_h = max(3, h // 8)
    canvas[top + frame + 2 : top + frame + 2 + bar_h, left + frame + 2 : left + w - frame - 2] = 0.9
    # body lines
    y = top + frame + 2 + bar_h + 4
    line_h = max(2, h // 16)
    while y + line_h < top + h - frame - 3:
        span = int((w - 2 * frame - 8) * (0.55 + 0.4 * ((y * 7919) % 97) / 97.0))
        canvas[y : y + line_h, left + frame + 4 : left + frame + 4 + span] = 0.75
        y += 2 * line_h + 2


def make_two_card_scene(
    params: SlmParams, depth: float = 0.5, threshold: float = 0.05
) -> TargetScene:
    """Two info cards on black: the sparse reference content for RoI and
    rate-distortion experiments."""
    h, w = params.shape
    canvas = np.zeros((h, w), dtype=np.float64)
    ch, cw = int(h * 0.16), int(w * 0.21)
    _card(canvas, int(h * 0.22), int(w * 0.16), ch, cw)
    ch2, cw2 = int(h * 0.14), int(w * 0.19)
    _card(canvas, int(h * 0.58), int(w * 0.60), ch2, cw2)
    _blank_guard(canvas)
    return TargetScene([SceneLayer(canvas, depth)], threshold)


def make_symbology_scene(
    params: SlmParams, depth: float = 0.5, threshold: float = 0.05
) -> TargetScene:
    """Crosshair, ring and tick marks on black (HUD-style symbology)."""
    h, w = params.shape
    canvas = np.zeros((h, w), dtype=np.float64)
    cy, cx = h // 2, w // 2
    r = min(h, w) * 0.18
    yy, xx = np.mgrid[0:h, 0:w]
    rho = np.hypot(yy - cy, xx - cx)
    canvas[np.abs(rho - r) < 1.5] = 1.0
    arm = int(r * 0.7)
    canvas[cy - 1 : cy + 2, cx - arm : cx + arm] = 1.0
    canvas[cy - arm : cy + arm, cx - 1 : cx + 2] = 1.0
    for ang in np.deg2rad(np.arange(0, 360, 30)):
        y0 = cy + (r + 4) * np.sin(ang)
        x0 = cx + (r + 4) * np.cos(ang)
        y1 = cy + (r + 14) * np.sin(ang)
        x1 = cx + (r + 14) * np.cos(ang)
        n = 16
        ys = np.round(np.linspace(y0, y1, n)).astype(int)
        xs = np.round(np.linspace(x0, x1, n)).astype(int)
        ok = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
        canvas[ys[ok], xs[ok]] = 0.8
    _blank_guard(canvas)
    return TargetScene([SceneLayer(canvas, depth)], threshold)


def make_full_frame_scene(
    params: SlmParams, depth: float = 0.5, threshold: float = 0.05
) -> TargetScene:
    """Bright content over the whole grid (no black background)."""
    h, w = params.shape
    yy, xx = np.mgrid[0:h, 0:w]
    cycles = 6.0 * np.pi  # three texture periods across the frame
    canvas = 0.55 + 0.35 * np.sin(cycles * xx / w) * np.cos(cycles * yy / h)
    canvas += 0.1 * ((xx // 16 + yy // 16) % 2)
    canvas = np.clip(canvas, 0.15, 1.0)
    return TargetScene([SceneLayer(canvas, depth)], threshold)


def _blank_guard(canvas: np.ndarray) -> None:
    canvas[:GUARD_BAND, :] = 0.0
    canvas[-GUARD_BAND:, :] = 0.0
    canvas[:, :GUARD_BAND] = 0.0
    canvas[:, -GUARD_BAND:] = 0.0


def builtin_scene(
    name: str, params: SlmParams, depth: float = 0.5, threshold: float = 0.05
) -> TargetScene:
    """Look up a bundled scene by name ('twocards', 'symbology', 'fullframe')."""
    makers = {
        "twocards": make_two_card_scene,
        "symbology": make_symbology_scene,
        "fullframe": make_full_frame_scene,
    }
    if name not in makers:
        raise ValueError(f"unknown builtin scene '{name}' (have {sorted(makers)})")
    return makers[name](params, depth=depth, threshold=threshold)
