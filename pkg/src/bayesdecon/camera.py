"""Per-pixel sCMOS camera model and the stochastic forward simulator.

The readout chain is: object -> expected photon image (PSF convolution)
-> Poisson photon counts -> Gaussian readout in ADU with per-pixel gain,
offset, and read-noise variance. Raw ADU values are kept real-valued; the
readout is modeled as a continuous Normal without quantization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import ImageGrid
from .optics import PSFKernel, convolve

#: Fallback read-noise standard deviation (ADU) when no calibration exists.
DEFAULT_READ_SD = 2.0


@dataclass(frozen=True)
class CameraMap:
    """Per-pixel calibration: gain (ADU/e-), offset (ADU), read variance (ADU^2)."""

    gain: np.ndarray
    offset: np.ndarray
    read_variance: np.ndarray

    def __post_init__(self):
        if not (self.gain.shape == self.offset.shape == self.read_variance.shape):
            raise ValueError("calibration maps must share one shape")
        if np.any(self.gain <= 0):
            raise ValueError("gain must be positive everywhere")
        if np.any(self.read_variance <= 0):
            raise ValueError("read variance must be positive everywhere")

    @property
    def shape(self) -> tuple[int, int]:
        return self.gain.shape


@dataclass(frozen=True)
class SimulationRecord:
    """One synthetic acquisition: ground truth, blurred mean, counts, raw ADU."""

    ground_truth: ImageGrid
    expected: ImageGrid
    photons: ImageGrid
    raw: ImageGrid
    seed: int

    def __post_init__(self):
        shapes = {
            self.ground_truth.shape,
            self.expected.shape,
            self.photons.shape,
            self.raw.shape,
        }
        if len(shapes) != 1:
            raise ValueError("all simulation stages must share one shape")


def uniform_camera(
    shape: tuple[int, int],
    gain: float = 2.0,
    offset: float = 100.0,
    read_sd: float = DEFAULT_READ_SD,
) -> CameraMap:
    """Spatially constant calibration maps (gain 2 ADU/e-, offset 100 ADU defaults)."""
    if gain <= 0:
        raise ValueError("gain must be positive")
    if read_sd <= 0:
        raise ValueError("read_sd must be positive")
    return CameraMap(
        gain=np.full(shape, float(gain)),
        offset=np.full(shape, float(offset)),
        read_variance=np.full(shape, float(read_sd) ** 2),
    )


def _row_rngs(seed: int, n_rows: int) -> list[np.random.Generator]:
    # One stream per row, split deterministically, so a row-parallel
    # simulator reproduces the sequential result bit for bit.
    children = np.random.SeedSequence(seed).spawn(n_rows)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def simulate_raw(
    obj: ImageGrid, psf: PSFKernel, camera: CameraMap, seed: int
) -> SimulationRecord:
    """Draw one synthetic raw image from the full forward model.

    Photon counts are exact Poisson draws (no Gaussian approximation), and
    the result is fully deterministic given ``seed``.
    """
    if camera.shape != obj.shape:
        raise ValueError(
            f"camera maps {camera.shape} do not match the object grid {obj.shape}"
        )
    expected = convolve(obj, psf)
    mu = expected.values
    photons = np.empty_like(mu)
    raw = np.empty_like(mu)
    for row, rng in enumerate(_row_rngs(seed, mu.shape[0])):
        phi = rng.poisson(mu[row]).astype(np.float64)
        photons[row] = phi
        raw[row] = camera.gain[row] * phi + camera.offset[row] + rng.normal(
            0.0, np.sqrt(camera.read_variance[row])
        )
    return SimulationRecord(
        ground_truth=obj,
        expected=expected,
        photons=ImageGrid(photons, obj.pixel_pitch, "photons"),
        raw=ImageGrid(raw, obj.pixel_pitch, "adu"),
        seed=seed,
    )


def adu_to_photon_estimate(raw: ImageGrid, camera: CameraMap) -> ImageGrid:
    """(w - offset) / gain, clamped at zero.

    A display / initialization convenience only; it is not a likelihood.
    """
    if camera.shape != raw.shape:
        raise ValueError(
            f"camera maps {camera.shape} do not match the raw grid {raw.shape}"
        )
    est = (raw.values - camera.offset) / camera.gain
    return ImageGrid(np.clip(est, 0.0, None), raw.pixel_pitch, "expected")
