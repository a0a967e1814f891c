"""Experiment configuration: TOML file plus command-line overrides."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, asdict
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .camera import CameraMap, uniform_camera, DEFAULT_READ_SD
from .imageio import load_camera_maps
from .optics import PSFKernel, airy_psf, gaussian_psf
from .sampler import SamplerConfig


@dataclass
class OpticsConfig:
    na: float = 1.3
    wavelength_nm: float = 510.0
    pixel_pitch_nm: float = 65.0
    psf_model: str = "gaussian"
    psf_side: int | None = None

    def build_psf(self) -> PSFKernel:
        if self.psf_model == "gaussian":
            return gaussian_psf(self.na, self.wavelength_nm, self.pixel_pitch_nm, self.psf_side)
        if self.psf_model == "airy":
            return airy_psf(self.na, self.wavelength_nm, self.pixel_pitch_nm, self.psf_side)
        raise ValueError(f"unknown psf_model {self.psf_model!r}; expected gaussian or airy")


@dataclass
class CameraConfig:
    gain: float = 2.0
    offset: float = 100.0
    read_sd: float = DEFAULT_READ_SD
    gain_map: str | None = None
    offset_map: str | None = None
    variance_map: str | None = None

    def build_camera(self, shape: tuple[int, int], base: Path | None = None) -> CameraMap:
        maps = (self.gain_map, self.offset_map, self.variance_map)
        if any(maps):
            if not all(maps):
                raise ValueError(
                    "calibration requires all three of gain_map, offset_map, variance_map"
                )
            paths = [Path(m) if base is None else base / m for m in maps]
            for p in paths:
                if not p.exists():
                    raise FileNotFoundError(f"missing calibration file: {p}")
            cam = load_camera_maps(*paths)
            if cam.shape != shape:
                raise ValueError(
                    f"calibration maps {cam.shape} do not match the image {shape}"
                )
            return cam
        return uniform_camera(shape, self.gain, self.offset, self.read_sd)


@dataclass
class RLConfig:
    n_iters: int = 1000
    checkpoints: list[int] = field(default_factory=lambda: [1, 10, 100, 1000])


@dataclass
class SimulateConfig:
    target: str = "siemens-star"
    size: int = 128
    peak: float = 150.0


@dataclass
class ExperimentConfig:
    optics: OpticsConfig = field(default_factory=OpticsConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    rl: RLConfig = field(default_factory=RLConfig)
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    seed: int = 0
    base_dir: Path | None = None

    @classmethod
    def from_toml(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"missing config file: {path}")
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        cfg = cls(
            optics=OpticsConfig(**data.get("optics", {})),
            camera=CameraConfig(**data.get("camera", {})),
            sampler=SamplerConfig(seed=data.get("seed", 0), **data.get("sampler", {})),
            rl=RLConfig(**data.get("rl", {})),
            simulate=SimulateConfig(**data.get("simulate", {})),
            seed=data.get("seed", 0),
            base_dir=path.parent,
        )
        return cfg

    def echo(self) -> dict:
        """JSON-serializable record of every parameter (for run manifests)."""
        d = asdict(self)
        d.pop("base_dir")
        return d
