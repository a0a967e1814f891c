"""Richardson-Lucy baseline deconvolution.

The classical multiplicative update, with no damping or regularization:
its iteration-dependent degradation on noisy data is exactly the behavior
the Bayesian sampler is compared against. RL assumes pure Poisson
statistics, so callers should feed gain/offset-corrected data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import ImageGrid
from .optics import PSFKernel, convolve, correlate
from .metrics import psnr, rmse

_EPS_DIV = 1e-12


@dataclass
class RLTrace:
    """Snapshots and per-iteration quality metrics of an RL run."""

    iterations: list[int] = field(default_factory=list)
    snapshots: list[ImageGrid] = field(default_factory=list)
    psnr_db: list[float] = field(default_factory=list)
    rmse_values: list[float] = field(default_factory=list)
    final: ImageGrid | None = None


def rl_step(estimate: ImageGrid, data: ImageGrid, psf: PSFKernel) -> ImageGrid:
    """One multiplicative RL update: e' = e * correlate(data / (e*psf), psf)."""
    if np.any(data.values < 0):
        raise ValueError(
            "RL requires non-negative data; offset/gain-correct and clamp first"
        )
    if np.any(estimate.values < 0):
        raise ValueError("estimate must be non-negative")
    blurred = convolve(estimate, psf).values
    ratio = data.values / (blurred + _EPS_DIV)
    update = correlate(ImageGrid(ratio, data.pixel_pitch, "expected"), psf).values
    return estimate.like(estimate.values * update)


def rl_run(
    data: ImageGrid,
    psf: PSFKernel,
    n_iters: int,
    checkpoints: list[int] | None = None,
    reference: ImageGrid | None = None,
) -> RLTrace:
    """Iterate RL from a flat start, recording checkpoints and metrics.

    The estimate is initialized to a constant image at mean(data), the
    common convention for unregularized RL. When ``reference`` is given,
    PSNR/RMSE against it are recorded at every iteration.
    """
    if n_iters < 1:
        raise ValueError("n_iters must be >= 1")
    checkpoints = sorted(set(checkpoints or []))
    trace = RLTrace()
    estimate = data.like(
        np.full(data.shape, max(float(data.values.mean()), _EPS_DIV)), "object"
    )
    for it in range(1, n_iters + 1):
        estimate = rl_step(estimate, data, psf)
        if reference is not None:
            trace.psnr_db.append(psnr(estimate, reference))
            trace.rmse_values.append(rmse(estimate, reference))
        if it in checkpoints:
            trace.iterations.append(it)
            trace.snapshots.append(estimate.like(estimate.values.copy()))
    trace.final = estimate
    return trace
