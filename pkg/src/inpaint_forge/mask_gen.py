"""Synthetic free-form training masks: eraser-style back-and-forth brushstrokes.

A stroke starts at a random point; segment lengths and angles are drawn
randomly, with the heading flipping by ~pi (plus jitter) at every vertex so the
polyline sweeps back and forth like an eraser. Strokes are rasterized as thick
segments with round caps via an exact distance-to-segment test, so masks are
reproducible bit-for-bit from (config, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .image_data import Mask


class MaskGenError(ValueError):
    pass


@dataclass(frozen=True)
class BrushConfig:
    num_strokes_range: tuple = (1, 4)
    num_vertices_range: tuple = (4, 12)
    length_range: tuple = (10.0, 40.0)
    width_range: tuple = (12.0, 40.0)
    angle_jitter: float = 0.35
    target_size: int = 256

    def __post_init__(self):
        for name in ("num_strokes_range", "num_vertices_range", "length_range", "width_range"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise MaskGenError(f"bad {name}: ({lo}, {hi})")
        if self.width_range[0] < 1:
            raise MaskGenError("stroke width must be >= 1 px")
        if self.target_size < 16:
            raise MaskGenError("target_size must be >= 16")


def _stamp_segment(hole, p0, p1, radius):
    """Mark pixels within `radius` of segment p0-p1 (round caps)."""
    h, w = hole.shape
    x0, y0 = p0
    x1, y1 = p1
    lo_x = max(int(np.floor(min(x0, x1) - radius)) - 1, 0)
    hi_x = min(int(np.ceil(max(x0, x1) + radius)) + 1, w - 1)
    lo_y = max(int(np.floor(min(y0, y1) - radius)) - 1, 0)
    hi_y = min(int(np.ceil(max(y0, y1) + radius)) + 1, h - 1)
    if lo_x > hi_x or lo_y > hi_y:
        return
    ys, xs = np.mgrid[lo_y : hi_y + 1, lo_x : hi_x + 1]
    dx, dy = x1 - x0, y1 - y0
    seg2 = dx * dx + dy * dy
    if seg2 == 0.0:
        proj = np.zeros_like(xs, dtype=np.float64)
    else:
        proj = np.clip(((xs - x0) * dx + (ys - y0) * dy) / seg2, 0.0, 1.0)
    cx = x0 + proj * dx
    cy = y0 + proj * dy
    dist2 = (xs - cx) ** 2 + (ys - cy) ** 2
    hole[lo_y : hi_y + 1, lo_x : hi_x + 1] |= dist2 <= radius * radius


def generate_mask(cfg: BrushConfig, seed: int) -> Mask:
    """Draw a brushstroke mask; union of strokes, binary, deterministic in seed."""
    rng = np.random.default_rng(seed)
    size = cfg.target_size
    hole = np.zeros((size, size), dtype=bool)
    n_strokes = int(rng.integers(cfg.num_strokes_range[0], cfg.num_strokes_range[1] + 1))
    for _ in range(n_strokes):
        n_vertices = int(rng.integers(cfg.num_vertices_range[0], cfg.num_vertices_range[1] + 1))
        width = float(rng.uniform(cfg.width_range[0], cfg.width_range[1]))
        x = float(rng.uniform(0, size))
        y = float(rng.uniform(0, size))
        angle = float(rng.uniform(0, 2 * np.pi))
        radius = width / 2.0
        for v in range(n_vertices):
            length = float(rng.uniform(cfg.length_range[0], cfg.length_range[1]))
            if v > 0:
                # back-and-forth: flip direction, then jitter
                angle += np.pi + float(rng.uniform(-cfg.angle_jitter, cfg.angle_jitter))
            nx = float(np.clip(x + length * np.cos(angle), 0, size - 1))
            ny = float(np.clip(y + length * np.sin(angle), 0, size - 1))
            _stamp_segment(hole, (x, y), (nx, ny), radius)
            x, y = nx, ny
    return Mask(hole.astype(np.float32))


def generate_rect_mask(size: int, seed: int, frac_range=(0.1, 0.4)) -> Mask:
    """Axis-aligned rectangular hole; side lengths drawn from frac_range of size."""
    rng = np.random.default_rng(seed)
    w = int(rng.uniform(*frac_range) * size)
    h = int(rng.uniform(*frac_range) * size)
    w, h = max(w, 1), max(h, 1)
    x = int(rng.integers(0, size - w + 1))
    y = int(rng.integers(0, size - h + 1))
    hole = np.zeros((size, size), dtype=np.float32)
    hole[y : y + h, x : x + w] = 1.0
    return Mask(hole)


def generate_training_mask(cfg: BrushConfig, seed: int, rect_prob: float = 0.2) -> Mask:
    """Brush mask, mixed with rectangles with probability rect_prob.

    The rectangle mix is an extension beyond strict brushstroke synthesis;
    set rect_prob = 0 to disable.
    """
    rng = np.random.default_rng(seed)
    if rect_prob > 0 and float(rng.random()) < rect_prob:
        return generate_rect_mask(cfg.target_size, seed + 1)
    return generate_mask(cfg, seed)


def rasterize_strokes(strokes, height: int, width: int) -> Mask:
    """Rasterize explicit polyline strokes [{'points': [(x, y), ...], 'width': w}].

    Shared by the mask generator's rendering path and the service's vector-mask
    payloads so UI brush and training masks agree pixel-for-pixel.
    """
    hole = np.zeros((height, width), dtype=bool)
    for stroke in strokes:
        pts = [(float(px), float(py)) for px, py in stroke["points"]]
        radius = float(stroke["width"]) / 2.0
        if radius < 0.5:
            raise MaskGenError("stroke width must be >= 1 px")
        if len(pts) == 1:
            pts = pts * 2
        for p0, p1 in zip(pts[:-1], pts[1:]):
            _stamp_segment(hole, p0, p1, radius)
    return Mask(hole.astype(np.float32))


def hole_stats(m: Mask) -> dict:
    """fraction of hole pixels, 4-connected component count, and hole bbox."""
    hole = m.data > 0.5
    fraction = float(hole.mean())
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    _, components = ndimage.label(hole, structure=structure)
    if hole.any():
        ys, xs = np.nonzero(hole)
        bbox = (int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))
    else:
        bbox = None
    return {"fraction": fraction, "components": int(components), "bbox": bbox}
