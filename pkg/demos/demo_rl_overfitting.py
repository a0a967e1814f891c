#!/usr/bin/env python3
"""Richardson-Lucy overfitting on photon-limited data.

Simulates a Siemens-star scene at ~150 peak photons through a widefield
Gaussian PSF, then runs 1000 unregularized RL iterations. PSNR against the
ground truth rises for the first handful of iterations and then degrades as
RL amplifies noise beyond the optical bandpass — the classic "when do I
stop?" dilemma. Writes a PSNR/RMSE-vs-iteration CSV and prints the turning
point.

Run:  python3 demos/demo_rl_overfitting.py [out_dir]
"""

import csv
import sys
from pathlib import Path

import numpy as np

from bayesdecon import (
    ExperimentConfig,
    adu_to_photon_estimate,
    rl_run,
    simulate_raw,
)
from bayesdecon.metrics import super_cutoff_energy_fraction
from bayesdecon.targets import make_target

CONFIG = Path(__file__).parent / "spoke_benchmark.toml"


def main(out_dir: str = "runs/rl_overfitting") -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = ExperimentConfig.from_toml(CONFIG)

    pitch = cfg.optics.pixel_pitch_nm
    truth = make_target(cfg.simulate.target, cfg.simulate.size, pitch, cfg.simulate.peak)
    psf = cfg.optics.build_psf()
    camera = cfg.camera.build_camera(truth.shape)
    record = simulate_raw(truth, psf, camera, cfg.seed)
    data = adu_to_photon_estimate(record.raw, camera)
    print(f"simulated {truth.shape[0]}x{truth.shape[1]} scene, "
          f"peak {truth.values.max():.0f} expected photons")

    trace = rl_run(data, psf, cfg.rl.n_iters, cfg.rl.checkpoints, reference=truth)
    psnr = np.array(trace.psnr_db)
    best = int(psnr.argmax()) + 1

    with open(out / "rl_metrics.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "step", "psnr_db", "rmse"])
        for i, (p, r) in enumerate(zip(trace.psnr_db, trace.rmse_values), 1):
            w.writerow(["rl", i, f"{p:.6f}", f"{r:.9g}"])

    print(f"PSNR peaks at iteration {best} ({psnr.max():.2f} dB), "
          f"then degrades to {psnr[-1]:.2f} dB by iteration {len(psnr)}")
    frac = super_cutoff_energy_fraction(trace.final, psf.cutoff_frequency)
    print(f"final RL estimate carries {100 * frac:.1f}% of its spectral "
          f"energy beyond the optical cutoff — pure noise amplification")
    print(f"metrics written to {out / 'rl_metrics.csv'}")


if __name__ == "__main__":
    main(*sys.argv[1:])
