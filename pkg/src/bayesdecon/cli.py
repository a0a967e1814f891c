"""Command-line interface: simulate, deconv rl, deconv bayes, compare.

Every run that writes files also writes a ``manifest.json`` recording the
full configuration, seed, and library versions, sufficient to reproduce
the outputs bit-exactly in single-chunk mode. Failures exit non-zero with
a single machine-parseable line on stderr (``error: <kind>: <detail>``).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .camera import adu_to_photon_estimate, simulate_raw
from .config import ExperimentConfig
from .grids import ImageGrid
from .imageio import load_image, save_image
from .metrics import compare, radial_spectrum
from .rl import rl_run
from .sampler import run_chain
from .targets import TARGET_NAMES, make_target
from .wavefront import build_layout, run_wavefront

WORKERS_ENV = "BAYESDECON_WORKERS"

_EXIT_USAGE = 2


class CLIError(Exception):
    def __init__(self, kind: str, detail: str):
        super().__init__(f"{kind}: {detail}")
        self.kind = kind
        self.detail = detail


def _load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        return ExperimentConfig.from_toml(path)
    except FileNotFoundError as e:
        raise CLIError("file-not-found", str(e)) from e
    except (ValueError, TypeError, KeyError) as e:
        raise CLIError("bad-config", f"{path}: {e}") from e


def _load_input(path: str, pixel_pitch: float, role: str = "adu") -> ImageGrid:
    try:
        return load_image(path, pixel_pitch, role)
    except FileNotFoundError as e:
        raise CLIError("file-not-found", str(e)) from e
    except ValueError as e:
        raise CLIError("bad-input", str(e)) from e


def _write_manifest(out_dir: Path, cfg: ExperimentConfig, command: str, extra: dict):
    record = {
        "command": command,
        "seed": cfg.seed,
        "config": cfg.echo(),
        "versions": {
            "bayesdecon": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
    }
    record.update(extra)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(record, fh, indent=2, default=str)
        fh.write("\n")


def _write_metrics(path: Path, rows: list[tuple[str, int, float, float]]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "step", "psnr_db", "rmse"])
        for method, step, p, r in rows:
            writer.writerow([method, step, f"{p:.6f}", f"{r:.9g}"])


def _apply_seed(cfg: ExperimentConfig, seed: int | None):
    if seed is not None:
        cfg.seed = seed
        cfg.sampler = dataclasses.replace(cfg.sampler, seed=seed)


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    _apply_seed(cfg, args.seed)
    if args.target is not None:
        cfg.simulate.target = args.target
    if args.size is not None:
        cfg.simulate.size = args.size
    if args.peak is not None:
        cfg.simulate.peak = args.peak

    pitch = cfg.optics.pixel_pitch_nm
    truth = make_target(cfg.simulate.target, cfg.simulate.size, pitch, cfg.simulate.peak)
    psf = cfg.optics.build_psf()
    camera = cfg.camera.build_camera(truth.shape, cfg.base_dir)
    record = simulate_raw(truth, psf, camera, cfg.seed)

    out = Path(args.out)
    save_image(truth, out / "ground_truth.tif")
    save_image(record.expected, out / "expected.tif")
    save_image(record.photons, out / "photons.tif")
    save_image(record.raw, out / "raw.tif")
    _write_manifest(out, cfg, "simulate", {"outputs": [
        "ground_truth.tif", "expected.tif", "photons.tif", "raw.tif"]})
    print(f"simulate: wrote {cfg.simulate.target} {truth.shape[0]}x{truth.shape[1]} to {out}")
    return 0


def cmd_deconv_rl(args) -> int:
    cfg = _load_config(args.config)
    _apply_seed(cfg, args.seed)
    if args.iters is not None:
        cfg.rl.n_iters = args.iters
    if args.checkpoints is not None:
        try:
            cfg.rl.checkpoints = [int(t) for t in args.checkpoints.split(",") if t]
        except ValueError as e:
            raise CLIError("bad-flag", f"--checkpoints: {e}") from e

    pitch = cfg.optics.pixel_pitch_nm
    raw = _load_input(args.input, pitch, "adu")
    psf = cfg.optics.build_psf()
    camera = cfg.camera.build_camera(raw.shape, cfg.base_dir)
    data = adu_to_photon_estimate(raw, camera)
    reference = _load_input(args.reference, pitch, "object") if args.reference else None

    trace = rl_run(data, psf, cfg.rl.n_iters, cfg.rl.checkpoints, reference)

    out = Path(args.out)
    for it, snap in zip(trace.iterations, trace.snapshots):
        save_image(snap, out / f"rl_iter_{it:06d}.tif")
    save_image(trace.final, out / "rl_final.tif")
    if reference is not None:
        rows = [
            ("rl", it + 1, p, r)
            for it, (p, r) in enumerate(zip(trace.psnr_db, trace.rmse_values))
        ]
        _write_metrics(out / "metrics.csv", rows)
    _write_manifest(out, cfg, "deconv rl", {
        "input": str(args.input),
        "checkpoints": cfg.rl.checkpoints,
        "n_iters": cfg.rl.n_iters,
    })
    print(f"deconv rl: {cfg.rl.n_iters} iterations, outputs in {out}")
    return 0


def _resolve_workers(flag: int | None) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(WORKERS_ENV)
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError as e:
            raise CLIError("bad-flag", f"{WORKERS_ENV}={env!r} is not an integer") from e
    return 1


def cmd_deconv_bayes(args) -> int:
    cfg = _load_config(args.config)
    _apply_seed(cfg, args.seed)
    overrides = {}
    if args.samples is not None:
        overrides["n_samples"] = args.samples
    if args.burn_in is not None:
        overrides["burn_in"] = args.burn_in
    if args.thin is not None:
        overrides["thin"] = args.thin
    if args.chunk_side is not None:
        overrides["chunk_side"] = args.chunk_side
    if overrides:
        cfg.sampler = dataclasses.replace(cfg.sampler, **overrides)
    workers = _resolve_workers(args.workers)

    pitch = cfg.optics.pixel_pitch_nm
    raw = _load_input(args.input, pitch, "adu")
    psf = cfg.optics.build_psf()
    camera = cfg.camera.build_camera(raw.shape, cfg.base_dir)
    reference = _load_input(args.reference, pitch, "object") if args.reference else None

    if cfg.sampler.chunk_side is not None:
        layout = build_layout(raw.shape, psf, cfg.sampler.chunk_side)
        summary = run_wavefront(raw, psf, camera, cfg.sampler, n_workers=workers, layout=layout)
    else:
        summary = run_chain(raw, psf, camera, cfg.sampler)

    out = Path(args.out)
    save_image(summary.mean, out / "mean.tif")
    save_image(summary.cv, out / "cv.tif")
    for i, sample in enumerate(summary.retained_samples):
        save_image(sample, out / f"sample_{i:04d}.tif")
    freqs, mags = radial_spectrum(summary.mean)
    with open(out / "spectrum.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frequency_per_nm", "mean_magnitude"])
        for f, m in zip(freqs, mags):
            writer.writerow([f"{f:.9g}", f"{m:.9g}"])
    if reference is not None:
        rep = compare(summary.mean, reference)
        _write_metrics(out / "metrics.csv",
                       [("bayes", summary.n_accumulated, rep.psnr_db, rep.rmse)])
    _write_manifest(out, cfg, "deconv bayes", {
        "input": str(args.input),
        "workers": workers,
        "n_accumulated": summary.n_accumulated,
        "acceptance_rate": summary.acceptance_rate,
    })
    print(
        f"deconv bayes: {summary.n_accumulated} samples accumulated, "
        f"acceptance {summary.acceptance_rate:.3f}, outputs in {out}"
    )
    return 0


def cmd_compare(args) -> int:
    a = _load_input(args.a, 1.0, "object")
    b = _load_input(args.b, 1.0, "object")
    max_value = None
    if args.max_from == "a":
        max_value = float(a.values.max())
    elif args.max_from == "b":
        max_value = float(b.values.max())
    try:
        rep = compare(a, b, max_value)
    except ValueError as e:
        raise CLIError("bad-input", str(e)) from e
    print("method,step,psnr_db,rmse")
    print(f"compare,0,{rep.psnr_db:.6f},{rep.rmse:.9g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bayesdecon",
        description="Unsupervised Bayesian image deconvolution with an RL baseline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a synthetic target and raw readout")
    p_sim.add_argument("--config", help="TOML experiment configuration")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--target", choices=TARGET_NAMES)
    p_sim.add_argument("--size", type=int)
    p_sim.add_argument("--peak", type=float)
    p_sim.add_argument("--seed", type=int)
    p_sim.set_defaults(func=cmd_simulate)

    p_dec = sub.add_parser("deconv", help="deconvolve a raw image")
    dec_sub = p_dec.add_subparsers(dest="method", required=True)

    p_rl = dec_sub.add_parser("rl", help="Richardson-Lucy baseline")
    p_rl.add_argument("--input", required=True, help="raw image (TIFF or CSV)")
    p_rl.add_argument("--config", help="TOML experiment configuration")
    p_rl.add_argument("--out", required=True, help="output directory")
    p_rl.add_argument("--checkpoints", help="comma-separated iterations to snapshot")
    p_rl.add_argument("--iters", type=int, help="total iterations (overrides config)")
    p_rl.add_argument("--reference", help="ground truth for metrics.csv")
    p_rl.add_argument("--seed", type=int)
    p_rl.set_defaults(func=cmd_deconv_rl)

    p_by = dec_sub.add_parser("bayes", help="Bayesian MCMC posterior sampling")
    p_by.add_argument("--input", required=True, help="raw image (TIFF or CSV)")
    p_by.add_argument("--config", help="TOML experiment configuration")
    p_by.add_argument("--out", required=True, help="output directory")
    p_by.add_argument("--samples", type=int, help="posterior samples to accumulate")
    p_by.add_argument("--burn-in", type=int, dest="burn_in")
    p_by.add_argument("--thin", type=int)
    p_by.add_argument("--chunk-side", type=int, dest="chunk_side")
    p_by.add_argument("--workers", type=int,
                      help=f"worker threads (default: ${WORKERS_ENV} or 1)")
    p_by.add_argument("--reference", help="ground truth for metrics.csv")
    p_by.add_argument("--seed", type=int)
    p_by.set_defaults(func=cmd_deconv_bayes)

    p_cmp = sub.add_parser("compare", help="PSNR/RMSE between two images")
    p_cmp.add_argument("--a", required=True, help="image under test")
    p_cmp.add_argument("--b", required=True, help="reference image")
    p_cmp.add_argument("--max-from", choices=("a", "b"), default="b", dest="max_from",
                       help="which image supplies the PSNR peak value")
    p_cmp.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CLIError as e:
        print(f"error: {e.kind}: {e.detail}", file=sys.stderr)
        return _EXIT_USAGE
    except FileNotFoundError as e:
        print(f"error: file-not-found: {e}", file=sys.stderr)
        return _EXIT_USAGE
    except ValueError as e:
        print(f"error: invalid-value: {e}", file=sys.stderr)
        return _EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
