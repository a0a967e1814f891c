"""2D raster container shared by the forward model and all inference code."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Semantic roles an image raster can play in the pipeline.
ROLES = ("object", "expected", "photons", "adu")


@dataclass
class ImageGrid:
    """A 2D real-valued raster with a physical pixel pitch.

    The ``role`` tag records what the values mean: an object intensity map,
    an expected (blurred) photon image, integer photon counts, or raw camera
    ADU. Non-negativity is enforced for every role except ``adu``, and
    photon-count grids must be integer-valued.
    """

    values: np.ndarray
    pixel_pitch: float  # nm
    role: str = "object"
    _skip_checks: bool = field(default=False, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"expected a 2D array, got ndim={self.values.ndim}")
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}, expected one of {ROLES}")
        if self.pixel_pitch <= 0:
            raise ValueError("pixel_pitch must be positive")
        if self._skip_checks:
            return
        if not np.all(np.isfinite(self.values)):
            raise ValueError("image values must be finite")
        if self.role in ("object", "expected", "photons") and np.any(self.values < 0):
            raise ValueError(f"role {self.role!r} requires non-negative values")
        if self.role == "photons" and not np.allclose(self.values, np.round(self.values)):
            raise ValueError("photon-count grids must be integer-valued")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def like(self, values: np.ndarray, role: str | None = None) -> "ImageGrid":
        """New grid with the same pitch (and role unless overridden)."""
        return ImageGrid(values, self.pixel_pitch, role if role is not None else self.role)
