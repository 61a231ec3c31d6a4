"""Rasterize trajectories for thumbnails and external embedders.

Agents are drawn as filled discs at each recorded position of a trailing
window, so recent motion leaves a trace. Type-agnostic renders are a single
channel; type-aware renders put type A in the red channel and type B in the
green channel, with no blending, so the agnostic image equals the pixelwise
max of the two aware channels.
"""
from __future__ import annotations

import numpy as np
from PIL import Image

from .features import AGNOSTIC, AWARE
from .sim import TYPE_A, TYPE_B, Trajectory


def _paint_discs(canvas: np.ndarray, centers_px: np.ndarray, radius_px: float) -> None:
    """Set to 255 every pixel whose center lies within radius of any disc center."""
    height, width = canvas.shape
    r = max(radius_px, 0.5)
    for cx, cy in centers_px:
        x_lo = max(int(np.floor(cx - r)), 0)
        x_hi = min(int(np.ceil(cx + r)) + 1, width)
        y_lo = max(int(np.floor(cy - r)), 0)
        y_hi = min(int(np.ceil(cy + r)) + 1, height)
        if x_lo >= x_hi or y_lo >= y_hi:
            continue
        ys = np.arange(y_lo, y_hi) + 0.5
        xs = np.arange(x_lo, x_hi) + 0.5
        dist2 = (xs[None, :] - cx) ** 2 + (ys[:, None] - cy) ** 2
        canvas[y_lo:y_hi, x_lo:x_hi][dist2 <= r * r] = 255


def _channel(traj: Trajectory, agent_indices: np.ndarray, resolution: int, trail_steps: int) -> np.ndarray:
    canvas = np.zeros((resolution, resolution), dtype=np.uint8)
    if agent_indices.size == 0:
        return canvas
    start = max(0, traj.horizon - trail_steps)
    pos = traj.positions[start:, agent_indices, :].reshape(-1, 2)
    sx = resolution / traj.config.world_width
    sy = resolution / traj.config.world_height
    centers = np.column_stack([pos[:, 0] * sx, pos[:, 1] * sy])
    radius_px = traj.config.agent_radius * min(sx, sy)
    _paint_discs(canvas, centers, radius_px)
    return canvas


def render_trajectory(
    traj: Trajectory,
    mode: str = AWARE,
    resolution: int = 128,
    trail_steps: int = 100,
) -> np.ndarray:
    """Raster image of a trajectory's trailing window.

    Returns (resolution, resolution) uint8 for agnostic mode and
    (resolution, resolution, 3) uint8 for aware mode.
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1 pixel")
    if trail_steps < 1:
        raise ValueError("trail_steps must be >= 1")
    if mode == AGNOSTIC:
        return _channel(traj, np.arange(traj.n_agents), resolution, trail_steps)
    if mode == AWARE:
        image = np.zeros((resolution, resolution, 3), dtype=np.uint8)
        image[:, :, 0] = _channel(traj, traj.type_indices(TYPE_A), resolution, trail_steps)
        image[:, :, 1] = _channel(traj, traj.type_indices(TYPE_B), resolution, trail_steps)
        return image
    raise ValueError(f"mode must be '{AGNOSTIC}' or '{AWARE}', got {mode!r}")


def image_to_png_bytes(image: np.ndarray) -> bytes:
    import io

    pil = Image.fromarray(image, mode="L" if image.ndim == 2 else "RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def save_png(image: np.ndarray, path) -> None:
    pil = Image.fromarray(image, mode="L" if image.ndim == 2 else "RGB")
    pil.save(path, format="PNG")
