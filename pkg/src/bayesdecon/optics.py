"""PSF models, OTF computation, and the FFT convolution operators.

DFT convention: the forward transform is unnormalized (``numpy.fft.fft2``)
and the inverse carries the 1/N factor, so a unit-mass PSF has DC magnitude
exactly 1 and Parseval reads ``sum |F(p)|^2 == N * sum p^2``.

Boundary handling: convolution zero-pads, i.e. the scene is assumed dark
outside the field of view. This keeps the forward model exactly linear.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import j1

from .grids import ImageGrid

#: Width parameter of the Gaussian widefield approximation, sigma = 0.21 * lambda / NA.
GAUSSIAN_SIGMA_FACTOR = 0.21

#: First/third zeros of the Airy pattern, J1(v) = 0.
AIRY_FIRST_ZERO = 3.8317059702075125
AIRY_THIRD_ZERO = 13.323691936314223

#: Fraction of kernel mass that defines the half support radius.
_SUPPORT_MASS = 1.0 - 1e-6


@dataclass(frozen=True)
class PSFKernel:
    """A discretized, unit-mass point spread function.

    ``half_support`` is the smallest radius (in pixels, Chebyshev metric)
    whose centered square window holds at least 1 - 1e-6 of the kernel mass.
    """

    values: np.ndarray
    pixel_pitch: float  # nm
    half_support: int
    cutoff_frequency: float | None = None  # 1/nm, = 2 NA / lambda when known

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("PSF must be a square 2D array")
        if v.shape[0] % 2 == 0:
            raise ValueError("PSF side length must be odd")
        if np.any(v < 0):
            raise ValueError("PSF values must be non-negative")
        if not np.isclose(v.sum(), 1.0, rtol=0, atol=1e-9):
            raise ValueError("PSF must be normalized to unit mass")

    @property
    def side(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class OTFSpectrum:
    """Modulus of the PSF's discrete Fourier transform on a padded grid."""

    magnitudes: np.ndarray
    cutoff_frequency: float  # 1/nm, = 2 NA / lambda
    pixel_pitch: float  # nm

    def cutoff_mask(self) -> np.ndarray:
        """Boolean mask of frequencies strictly beyond the optical cutoff."""
        nr, nc = self.magnitudes.shape
        fr = np.fft.fftfreq(nr, d=self.pixel_pitch)
        fc = np.fft.fftfreq(nc, d=self.pixel_pitch)
        f2 = fr[:, None] ** 2 + fc[None, :] ** 2
        return f2 > self.cutoff_frequency**2


def _finalize_kernel(
    values: np.ndarray, pixel_pitch: float, cutoff: float | None = None
) -> PSFKernel:
    values = values / values.sum()
    half = _half_support(values)
    return PSFKernel(
        values=values, pixel_pitch=pixel_pitch, half_support=half, cutoff_frequency=cutoff
    )


def _half_support(values: np.ndarray) -> int:
    c = values.shape[0] // 2
    for r in range(c + 1):
        if values[c - r : c + r + 1, c - r : c + r + 1].sum() >= _SUPPORT_MASS:
            return r
    return c


def _radius_grid(side: int, pixel_pitch: float) -> np.ndarray:
    x = (np.arange(side) - side // 2) * pixel_pitch
    return np.hypot(x[:, None], x[None, :])


def _check_psf_args(na: float, wavelength: float, pixel_pitch: float, side: int):
    if not 0 < na <= 2:
        raise ValueError("numerical aperture must lie in (0, 2]")
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    if pixel_pitch <= 0:
        raise ValueError("pixel pitch must be positive")
    if side < 1 or side % 2 == 0:
        raise ValueError("PSF side length must be a positive odd integer")


def _odd_at_least(n: int) -> int:
    n = max(int(n), 1)
    return n if n % 2 == 1 else n + 1


def gaussian_psf(
    na: float, wavelength: float, pixel_pitch: float, side: int | None = None
) -> PSFKernel:
    """Isotropic Gaussian PSF with sigma = 0.21 * lambda / NA.

    The Gaussian width is the standard widefield approximation; it is a
    documented modeling choice, not derived from first principles. The
    kernel is sampled at pixel centers (midpoint rule) and normalized to
    unit mass. ``side`` defaults to the smallest odd integer covering
    6 sigma.
    """
    _check_psf_args(na, wavelength, pixel_pitch, side if side is not None else 1)
    sigma = GAUSSIAN_SIGMA_FACTOR * wavelength / na
    if side is None:
        side = _odd_at_least(int(np.ceil(6 * sigma / pixel_pitch)))
        _check_psf_args(na, wavelength, pixel_pitch, side)
    if sigma < 0.5 * pixel_pitch:
        warnings.warn(
            f"PSF sigma {sigma:.1f} nm is below half the pixel pitch "
            f"({pixel_pitch:.1f} nm); the kernel is undersampled",
            stacklevel=2,
        )
    r = _radius_grid(side, pixel_pitch)
    values = np.exp(-0.5 * (r / sigma) ** 2)
    return _finalize_kernel(values, pixel_pitch, cutoff=2.0 * na / wavelength)


def airy_psf(
    na: float, wavelength: float, pixel_pitch: float, side: int | None = None
) -> PSFKernel:
    """Airy-disk PSF, proportional to [2 J1(v) / v]^2 with v = 2 pi NA r / lambda.

    The removable singularity at r = 0 takes its limit value (1 before
    normalization). ``side`` defaults to the smallest odd integer covering
    three Airy rings.
    """
    _check_psf_args(na, wavelength, pixel_pitch, side if side is not None else 1)
    if side is None:
        r3 = AIRY_THIRD_ZERO * wavelength / (2 * np.pi * na)
        side = _odd_at_least(int(np.ceil(2 * r3 / pixel_pitch)))
        _check_psf_args(na, wavelength, pixel_pitch, side)
    sigma_equiv = GAUSSIAN_SIGMA_FACTOR * wavelength / na
    if sigma_equiv < 0.5 * pixel_pitch:
        warnings.warn(
            f"Airy core width {sigma_equiv:.1f} nm is below half the pixel "
            f"pitch ({pixel_pitch:.1f} nm); the kernel is undersampled",
            stacklevel=2,
        )
    r = _radius_grid(side, pixel_pitch)
    v = 2 * np.pi * na * r / wavelength
    values = np.ones_like(v)
    nz = v > 0
    values[nz] = (2 * j1(v[nz]) / v[nz]) ** 2
    return _finalize_kernel(values, pixel_pitch, cutoff=2.0 * na / wavelength)


def otf_from_psf(psf: PSFKernel, grid_shape: tuple[int, int]) -> OTFSpectrum:
    """Element-wise modulus of the PSF's DFT, zero-padded to ``grid_shape``.

    The kernel center lands on the (0, 0) frequency-origin pixel, so the
    magnitudes are Hermitian-symmetric and the DC value equals the kernel
    mass (1 for a unit-mass PSF).
    """
    nr, nc = grid_shape
    side = psf.side
    if nr < side or nc < side:
        raise ValueError(f"grid shape {grid_shape} is smaller than the PSF side {side}")
    padded = np.zeros((nr, nc))
    padded[:side, :side] = psf.values
    padded = np.roll(padded, (-(side // 2), -(side // 2)), axis=(0, 1))
    magnitudes = np.abs(np.fft.fft2(padded))
    # Hand-built kernels carry no optics metadata; fall back to Nyquist.
    cutoff = psf.cutoff_frequency
    if cutoff is None:
        cutoff = 0.5 / psf.pixel_pitch
    return OTFSpectrum(
        magnitudes=magnitudes, cutoff_frequency=cutoff, pixel_pitch=psf.pixel_pitch
    )


def _clamp_negative(values: np.ndarray) -> np.ndarray:
    # FFT round-off can leave a tiny negative floor; anything larger than
    # the floor indicates an invalid input.
    floor = 1e-10 * max(1.0, float(np.abs(values).max()))
    if np.any(values < -floor):
        raise ValueError("convolution produced significantly negative values")
    return np.clip(values, 0.0, None)


def convolve(obj: ImageGrid, psf: PSFKernel) -> ImageGrid:
    """Expected image = PSF (*) object, zero-padded FFT convolution.

    Total mass is conserved (up to round-off) whenever the object's support
    stays at least ``half_support`` pixels away from the frame edge.
    """
    if not np.all(np.isfinite(obj.values)) or np.any(obj.values < 0):
        raise ValueError("object must be finite and non-negative")
    out = fftconvolve(obj.values, psf.values, mode="same")
    return ImageGrid(_clamp_negative(out), obj.pixel_pitch, "expected")


def correlate(image: ImageGrid, psf: PSFKernel) -> ImageGrid:
    """Adjoint of :func:`convolve`: convolution with the mirrored kernel."""
    if not np.all(np.isfinite(image.values)) or np.any(image.values < 0):
        raise ValueError("image must be finite and non-negative")
    out = fftconvolve(image.values, psf.values[::-1, ::-1], mode="same")
    return ImageGrid(_clamp_negative(out), image.pixel_pitch, "expected")
