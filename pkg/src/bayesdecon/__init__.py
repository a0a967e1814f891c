"""Unsupervised Bayesian image deconvolution with a Richardson-Lucy baseline.

The forward model is a Poisson photon count under a PSF-blurred intensity
map, read out through a per-pixel gain/offset/read-noise camera. Inference
is Metropolis-within-Gibbs MCMC under a Dirichlet prior on the normalized
Fourier magnitudes, parameterized by the optical transfer function, and can
be wavefront-parallelized over image chunks with deterministic results.
"""

__version__ = "0.1.0"

from .grids import ImageGrid
from .optics import (
    PSFKernel,
    OTFSpectrum,
    gaussian_psf,
    airy_psf,
    otf_from_psf,
    convolve,
    correlate,
)
from .camera import (
    CameraMap,
    SimulationRecord,
    uniform_camera,
    simulate_raw,
    adu_to_photon_estimate,
)
from .spectral_prior import (
    DirichletOTFPrior,
    SpectrumState,
    build_prior,
    log_prior,
    update_pixel,
    sample_from_prior,
)
from .sampler import (
    SamplerConfig,
    PosteriorSummary,
    run_chain,
    log_likelihood_completed,
    log_likelihood_marginal,
    sample_photons_given_readout,
)
from .wavefront import ChunkLayout, build_layout, single_chunk_layout, run_wavefront
from .rl import RLTrace, rl_step, rl_run
from .metrics import MetricReport, psnr, rmse, compare, cv_map, radial_spectrum
from .targets import make_target, siemens_star, point_grid, bars, TARGET_NAMES
from .imageio import load_image, save_image, load_camera_maps
from .config import ExperimentConfig

__all__ = [
    "ImageGrid",
    "PSFKernel",
    "OTFSpectrum",
    "gaussian_psf",
    "airy_psf",
    "otf_from_psf",
    "convolve",
    "correlate",
    "CameraMap",
    "SimulationRecord",
    "uniform_camera",
    "simulate_raw",
    "adu_to_photon_estimate",
    "DirichletOTFPrior",
    "SpectrumState",
    "build_prior",
    "log_prior",
    "update_pixel",
    "sample_from_prior",
    "SamplerConfig",
    "PosteriorSummary",
    "run_chain",
    "log_likelihood_completed",
    "log_likelihood_marginal",
    "sample_photons_given_readout",
    "ChunkLayout",
    "build_layout",
    "single_chunk_layout",
    "run_wavefront",
    "RLTrace",
    "rl_step",
    "rl_run",
    "MetricReport",
    "psnr",
    "rmse",
    "compare",
    "cv_map",
    "radial_spectrum",
    "make_target",
    "siemens_star",
    "point_grid",
    "bars",
    "TARGET_NAMES",
    "load_image",
    "save_image",
    "load_camera_maps",
    "ExperimentConfig",
]
