"""Image-quality metrics (PSNR, RMSE) and the posterior uncertainty map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import ImageGrid

#: PSNR reported for a perfect match (rmse = 0), instead of +inf.
PSNR_CAP_DB = 200.0

#: Pixels with posterior mean below this are flagged undefined in the CV map.
CV_MEAN_FLOOR = 1e-9


@dataclass(frozen=True)
class MetricReport:
    psnr_db: float
    rmse: float
    n_pixels: int
    max_value_used: float


def rmse(a: ImageGrid, b: ImageGrid) -> float:
    """Root mean square difference."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a.values - b.values) ** 2)))


def psnr(a: ImageGrid, reference: ImageGrid, max_value: float | None = None) -> float:
    """Peak signal-to-noise ratio in dB, 20 log10(max / rmse).

    ``max_value`` defaults to the reference maximum (images here live on a
    photon scale, not a fixed bit depth). An exact match is capped at
    ``PSNR_CAP_DB``.
    """
    err = rmse(a, reference)
    if max_value is None:
        max_value = float(reference.values.max())
    if max_value <= 0:
        raise ValueError("max_value must be positive")
    if err == 0:
        return PSNR_CAP_DB
    return float(20.0 * np.log10(max_value / err))


def compare(a: ImageGrid, reference: ImageGrid, max_value: float | None = None) -> MetricReport:
    used = float(reference.values.max()) if max_value is None else float(max_value)
    return MetricReport(
        psnr_db=psnr(a, reference, max_value),
        rmse=rmse(a, reference),
        n_pixels=int(a.values.size),
        max_value_used=used,
    )


def cv_map(summary) -> ImageGrid:
    """Per-pixel coefficient of variation (std / mean) of the posterior.

    Uses the population (divide-by-N) standard deviation, matching the
    streaming second-moment accumulation. Pixels whose mean is below
    ``CV_MEAN_FLOOR`` are set to NaN and should be excluded from statistics.
    """
    if summary.n_accumulated < 2:
        raise ValueError("need at least 2 accumulated samples for a CV map")
    mean = summary.mean.values
    var = np.maximum(summary.second_moment.values - mean**2, 0.0)
    cv = np.full_like(mean, np.nan)
    ok = mean > CV_MEAN_FLOOR
    cv[ok] = np.sqrt(var[ok]) / mean[ok]
    return ImageGrid(cv, summary.mean.pixel_pitch, "object", _skip_checks=True)


def radial_spectrum(image: ImageGrid) -> tuple[np.ndarray, np.ndarray]:
    """Radially averaged Fourier magnitudes (frequency in 1/nm, magnitude)."""
    vals = image.values
    nr, nc = vals.shape
    spec = np.abs(np.fft.fft2(vals))
    fr = np.fft.fftfreq(nr, d=image.pixel_pitch)
    fc = np.fft.fftfreq(nc, d=image.pixel_pitch)
    f = np.hypot(fr[:, None], fc[None, :])
    nyquist = 0.5 / image.pixel_pitch
    nbins = max(nr, nc) // 2
    edges = np.linspace(0, nyquist, nbins + 1)
    idx = np.clip(np.digitize(f.ravel(), edges) - 1, 0, nbins - 1)
    sums = np.bincount(idx, weights=spec.ravel(), minlength=nbins)
    counts = np.bincount(idx, minlength=nbins)
    centers = 0.5 * (edges[:-1] + edges[1:])
    with np.errstate(invalid="ignore"):
        prof = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return centers, prof


def super_cutoff_energy_fraction(image: ImageGrid, cutoff_frequency: float) -> float:
    """Fraction of total spectral energy carried beyond the optical cutoff."""
    vals = image.values
    nr, nc = vals.shape
    power = np.abs(np.fft.fft2(vals)) ** 2
    fr = np.fft.fftfreq(nr, d=image.pixel_pitch)
    fc = np.fft.fftfreq(nc, d=image.pixel_pitch)
    f2 = fr[:, None] ** 2 + fc[None, :] ** 2
    beyond = f2 > cutoff_frequency**2
    return float(power[beyond].sum() / power.sum())
