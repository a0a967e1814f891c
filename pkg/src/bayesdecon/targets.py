"""Synthetic ground-truth targets for simulation studies.

Approximations of the usual resolution test scenes (a Siemens star with
sharp radial edges, a point grid, bar groups); peak intensity is given in
expected photons.
"""

from __future__ import annotations

import numpy as np

from .grids import ImageGrid

TARGET_NAMES = ("siemens-star", "point-grid", "bars")


def siemens_star(
    size: int, pixel_pitch: float, peak: float = 150.0, n_spokes: int = 16
) -> ImageGrid:
    """Radial spoke pattern with increasingly fine spacing toward the center."""
    c = (size - 1) / 2.0
    y, x = np.mgrid[0:size, 0:size]
    theta = np.arctan2(y - c, x - c)
    r = np.hypot(y - c, x - c)
    spokes = 0.5 * (1.0 + np.cos(n_spokes * theta))
    disk = r <= 0.48 * size
    values = peak * spokes * disk
    return ImageGrid(values, pixel_pitch, "object")


def point_grid(
    size: int, pixel_pitch: float, peak: float = 150.0, spacing: int = 16
) -> ImageGrid:
    """Isolated bright pixels on a regular lattice."""
    values = np.zeros((size, size))
    values[spacing // 2 :: spacing, spacing // 2 :: spacing] = peak
    return ImageGrid(values, pixel_pitch, "object")


def bars(
    size: int, pixel_pitch: float, peak: float = 150.0, widths: tuple[int, ...] = (1, 2, 4, 8)
) -> ImageGrid:
    """Vertical bar groups of decreasing width (square-wave resolution test)."""
    values = np.zeros((size, size))
    col = 2
    for w in widths:
        for _ in range(4):
            values[:, col : min(col + w, size)] = peak
            col += 2 * w
            if col >= size:
                break
        col += 2 * w
        if col >= size:
            break
    return ImageGrid(values, pixel_pitch, "object")


def make_target(name: str, size: int, pixel_pitch: float, peak: float = 150.0) -> ImageGrid:
    if name == "siemens-star":
        return siemens_star(size, pixel_pitch, peak)
    if name == "point-grid":
        return point_grid(size, pixel_pitch, peak)
    if name == "bars":
        return bars(size, pixel_pitch, peak)
    raise ValueError(f"unknown target {name!r}, expected one of {TARGET_NAMES}")
