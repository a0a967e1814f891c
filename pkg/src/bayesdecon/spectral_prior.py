"""Dirichlet prior on the object's normalized Fourier magnitudes.

The concentration vector is the normalized OTF modulus (with a small floor
so the density stays proper), which suppresses spectral energy beyond the
optical bandpass while staying invariant under rescaling of the object.

The density is evaluated on the full vectorized frequency grid. Hermitian
symmetry means each (k, -k) pair contributes twice; this matches evaluating
the vectorized Dirichlet directly and is an explicit modeling choice. No
(magnitude, phase) change-of-variables Jacobian is applied: the prior
constrains magnitudes only and leaves phases free.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .optics import OTFSpectrum

#: Incremental spectrum updates between full FFT refreshes.
DEFAULT_REFRESH_INTERVAL = 4096

#: Default concentration floor, expressed per grid point (1e-6 / K).
DEFAULT_ALPHA_FLOOR_TOTAL = 1e-6


@dataclass(frozen=True)
class DirichletOTFPrior:
    """Dirichlet concentrations: normalized |OTF| floored away from zero."""

    alpha: np.ndarray
    alpha_floor: float

    def __post_init__(self):
        if np.any(self.alpha <= 0):
            raise ValueError("Dirichlet concentrations must be strictly positive")
        if not np.isclose(self.alpha.sum(), 1.0, rtol=0, atol=1e-12):
            raise ValueError("concentrations must sum to 1")


@dataclass
class SpectrumState:
    """Cached DFT of the current object, supporting O(K) single-pixel updates.

    After ``refresh_interval`` incremental updates the spectrum is recomputed
    from the object with a fresh FFT to bound floating-point drift.
    """

    object_values: np.ndarray
    complex_spectrum: np.ndarray
    magnitudes: np.ndarray
    magnitude_sum: float
    refresh_interval: int = DEFAULT_REFRESH_INTERVAL
    updates_since_refresh: int = field(default=0, repr=False)

    @classmethod
    def from_object(
        cls, obj: np.ndarray, refresh_interval: int = DEFAULT_REFRESH_INTERVAL
    ) -> "SpectrumState":
        obj = np.array(obj, dtype=np.float64)
        spectrum = np.fft.fft2(obj)
        magnitudes = np.abs(spectrum)
        return cls(
            object_values=obj,
            complex_spectrum=spectrum,
            magnitudes=magnitudes,
            magnitude_sum=float(magnitudes.sum()),
            refresh_interval=refresh_interval,
        )

    def refresh(self):
        """Recompute the cached spectrum from the object with a full FFT."""
        self.complex_spectrum = np.fft.fft2(self.object_values)
        self.magnitudes = np.abs(self.complex_spectrum)
        self.magnitude_sum = float(self.magnitudes.sum())
        self.updates_since_refresh = 0


def build_prior(
    otf: OTFSpectrum, alpha_floor: float | None = None
) -> DirichletOTFPrior:
    """Concentrations proportional to max(|OTF|, floor), normalized to sum 1.

    ``alpha_floor`` defaults to 1e-6 / K where K is the grid size; the raw
    OTF modulus is numerically ~0 beyond the cutoff and a proper Dirichlet
    needs strictly positive concentrations.
    """
    mags = otf.magnitudes
    if np.any(mags < 0):
        raise ValueError("OTF magnitudes must be non-negative")
    if not np.any(mags > 0):
        raise ValueError("OTF is identically zero")
    if alpha_floor is None:
        alpha_floor = DEFAULT_ALPHA_FLOOR_TOTAL / mags.size
    if alpha_floor <= 0:
        raise ValueError("alpha_floor must be positive")
    raw = np.maximum(mags, alpha_floor)
    return DirichletOTFPrior(alpha=raw / raw.sum(), alpha_floor=float(alpha_floor))


def log_prior(spectrum: SpectrumState, prior: DirichletOTFPrior) -> float:
    """Unnormalized Dirichlet log density of the normalized magnitudes.

    Returns ``sum_k (alpha_k - 1) log x_k`` with x = magnitudes / sum; the
    constant -log B(alpha) is omitted since MCMC only needs ratios. A zero
    magnitude where alpha_k < 1 yields -inf (and +inf never occurs because
    exact zeros are excluded for alpha_k > 1 as a measure-zero boundary).
    """
    if prior.alpha.shape != spectrum.magnitudes.shape:
        raise ValueError("prior and spectrum grids do not match")
    if spectrum.magnitude_sum <= 0:
        raise ValueError("spectrum is identically zero")
    x = spectrum.magnitudes / spectrum.magnitude_sum
    zero = x == 0
    if np.any(zero):
        if np.any(prior.alpha[zero] < 1):
            return float("-inf")
        x = np.where(zero, 1.0, x)  # (alpha - 1) log 1 = 0 contribution
    return float(np.sum((prior.alpha - 1.0) * np.log(x)))


def update_pixel(
    spectrum: SpectrumState, pixel: tuple[int, int], delta: float
) -> SpectrumState:
    """Apply an object-pixel increment to the cached spectrum in place.

    Adding ``delta`` at object pixel m shifts every Fourier coefficient by
    ``delta * exp(-2 pi i k.m / N)``; the update is O(K) instead of a full
    FFT. Mutates and returns ``spectrum``.
    """
    nr, nc = spectrum.object_values.shape
    r, c = pixel
    if not (0 <= r < nr and 0 <= c < nc):
        raise ValueError(f"pixel {pixel} outside the {nr}x{nc} grid")
    spectrum.object_values[r, c] += delta
    phase_r = np.exp(-2j * np.pi * np.arange(nr) * (r / nr))
    phase_c = np.exp(-2j * np.pi * np.arange(nc) * (c / nc))
    spectrum.complex_spectrum += delta * np.outer(phase_r, phase_c)
    spectrum.magnitudes = np.abs(spectrum.complex_spectrum)
    spectrum.magnitude_sum = float(spectrum.magnitudes.sum())
    spectrum.updates_since_refresh += 1
    if spectrum.updates_since_refresh >= spectrum.refresh_interval:
        spectrum.refresh()
    return spectrum


def sample_from_prior(prior: DirichletOTFPrior, seed: int) -> np.ndarray:
    """One draw of normalized magnitudes via the Gamma construction.

    Components with extremely small concentrations may underflow to exact
    zero in double precision; the draw is renormalized to sum 1.
    """
    rng = np.random.default_rng(seed)
    g = rng.gamma(shape=prior.alpha, scale=1.0)
    total = g.sum()
    if total == 0:
        # Pathologically tiny concentrations everywhere; fall back to the mode.
        return prior.alpha.copy()
    return g / total
