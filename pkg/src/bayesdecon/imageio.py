"""Image and calibration-map file I/O: grayscale TIFF and CSV grids.

Values are read and written as-is (no rescaling): a 16-bit TIFF pixel of
65535 loads as 65535.0. Outputs default to 32-bit float TIFF so posterior
means are not quantized; CSV grids round-trip float64 exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .camera import CameraMap
from .grids import ImageGrid

_TIFF_SUFFIXES = (".tif", ".tiff")
_SINGLE_CHANNEL_MODES = ("L", "I", "I;16", "I;16B", "I;16L", "F")


def load_image(path: str | Path, pixel_pitch: float = 1.0, role: str = "adu") -> ImageGrid:
    """Read a single-channel TIFF or a comma-separated text grid."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such image file: {path}")
    if path.suffix.lower() in _TIFF_SUFFIXES:
        with Image.open(path) as img:
            if img.mode not in _SINGLE_CHANNEL_MODES:
                raise ValueError(
                    f"{path}: only single-channel grayscale TIFF is supported, "
                    f"got mode {img.mode!r}"
                )
            values = np.asarray(img, dtype=np.float64)
    elif path.suffix.lower() == ".csv":
        values = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    else:
        raise ValueError(
            f"{path}: unsupported format {path.suffix!r}; expected .tif/.tiff or .csv"
        )
    return ImageGrid(values, pixel_pitch, role)


def save_image(grid: ImageGrid, path: str | Path):
    """Write a 32-bit float TIFF (.tif/.tiff) or a full-precision CSV grid."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() in _TIFF_SUFFIXES:
        Image.fromarray(grid.values.astype(np.float32), mode="F").save(path)
    elif path.suffix.lower() == ".csv":
        np.savetxt(path, grid.values, delimiter=",", fmt="%.17g")
    else:
        raise ValueError(f"{path}: unsupported output format {path.suffix!r}")


def load_camera_maps(
    gain_path: str | Path, offset_path: str | Path, variance_path: str | Path
) -> CameraMap:
    """Calibration maps from three single-channel images (gain, offset, variance)."""
    gain = load_image(gain_path).values
    offset = load_image(offset_path).values
    variance = load_image(variance_path).values
    return CameraMap(gain=gain, offset=offset, read_variance=variance)
