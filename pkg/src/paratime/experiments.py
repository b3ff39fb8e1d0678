"""Experiment configs, named study presets, and CSV output.

A config is a flat set of fields that maps one-to-one onto a ``key = value``
text file. ``run_experiment`` turns it into grids, propagators and an
initial state, runs the requested parareal variant, and writes

* ``errors.csv``    iteration, coupling index, energy_error, l2_error
* ``residuals.csv`` iteration, relative Procrustes residual, retained rank
* ``summary.csv``   final-time errors per iteration plus a diverged flag
* ``config.txt`` and ``metadata.json``
"""
from __future__ import annotations

import csv
import dataclasses
import difflib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .energy import SCHEMES
from .grid import Grid, SpeedField, SpeedFileError, WaveState, bilinear_resize, read_speed_file
from .parareal import VARIANTS, CouplingSchedule, ParaRun, run_variant

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to CLI exit status 2)."""


@dataclass
class ExperimentConfig:
    name: str = "custom"
    dimension: int = 1
    extent: tuple = (1.0,)
    origin: tuple = (-0.5,)
    initial: str = "gaussian-cosine-pulse"
    initial_params: dict = field(default_factory=dict)
    speed: str = "constant"
    speed_params: dict = field(default_factory=dict)
    T: float = 5.0
    dt_com: float = 0.05
    dx: float = 0.01
    cfl: float = 0.5
    ratio: int = 1
    m_t: int = 20
    cfl_ratio: float = 0.0
    interp: str = "fourier"
    scheme: str = "fd2"
    tol: float = 1e-14
    K: int = 15
    variant: str = "theta"
    remove_count: int = 0
    out: str = "runs/custom"

    # ---- derived discretization -------------------------------------
    @property
    def fine_time_ratio(self) -> int:
        """Coarse-to-fine time-step ratio ``Delta t / delta t``."""
        if self.cfl_ratio:
            return int(round(self.cfl_ratio * self.ratio))
        return int(self.m_t)

    def coarse_grid(self) -> Grid:
        shape = []
        for L in self.extent:
            n = L / self.dx
            if abs(n - round(n)) > 1e-6 * n:
                raise ConfigError(f"extent {L} is not a whole number of dx={self.dx}")
            shape.append(int(round(n)))
        return Grid(tuple(shape), (self.dx,) * self.dimension, tuple(self.origin))

    def coarse_steps(self) -> int:
        m = self.dt_com / (self.cfl * self.dx)
        if abs(m - round(m)) > 1e-6 * m or round(m) < 1:
            raise ConfigError(
                f"dt_com={self.dt_com} is not a whole number of coarse steps of {self.cfl * self.dx}")
        return int(round(m))

    def validate(self) -> "ExperimentConfig":
        if self.dimension not in (1, 2):
            raise ConfigError("dimension must be 1 or 2")
        for key in ("extent", "origin"):
            if len(getattr(self, key)) != self.dimension:
                raise ConfigError(f"{key} needs {self.dimension} entries")
        if self.initial not in INITIAL_CONDITIONS:
            raise ConfigError(_unknown("initial condition", self.initial, INITIAL_CONDITIONS))
        if not self.speed.startswith("file:") and self.speed not in SPEED_MODELS:
            raise ConfigError(_unknown("speed model", self.speed, SPEED_MODELS))
        for key in ("T", "dt_com", "dx", "cfl"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"{key} must be positive")
        if self.ratio < 1 or self.fine_time_ratio < 1 or self.K < 1 or self.remove_count < 0:
            raise ConfigError("ratio, m_t, K must be >= 1 and remove_count >= 0")
        if self.interp not in ("fourier", "linear"):
            raise ConfigError(_unknown("interpolation", self.interp, ("fourier", "linear")))
        if self.scheme not in SCHEMES:
            raise ConfigError(_unknown("gradient scheme", self.scheme, SCHEMES))
        if self.variant not in VARIANTS:
            raise ConfigError(_unknown("variant", self.variant, VARIANTS))
        if not 0 < self.tol < 1:
            raise ConfigError("tol must lie in (0, 1)")
        N = self.T / self.dt_com
        if abs(N - round(N)) > 1e-9 * N:
            raise ConfigError(f"T={self.T} is not a whole number of dt_com={self.dt_com}")
        self.coarse_grid()
        self.coarse_steps()
        return self

    # ---- text format -------------------------------------------------
    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            lines.append(f"{f.name} = {_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        cfg = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            cfg.set(key, value)
        return cfg

    def set(self, key: str, value: str) -> None:
        types = {f.name: f for f in dataclasses.fields(self)}
        if key not in types:
            raise ConfigError(_unknown("config key", key, types))
        current = getattr(self, key)
        try:
            setattr(self, key, _parse_value(value, current))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from exc

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


def _format_value(v) -> str:
    if isinstance(v, dict):
        return ",".join(f"{k}:{float(x)!r}" for k, x in v.items())
    if isinstance(v, (tuple, list)):
        return ",".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(text: str, current):
    if isinstance(current, dict):
        out = {}
        for item in filter(None, (s.strip() for s in text.split(","))):
            k, _, x = item.partition(":")
            if not _:
                raise ValueError("expected name:value pairs")
            out[k.strip()] = float(x)
        return out
    if isinstance(current, tuple):
        return tuple(float(s) for s in text.split(",") if s.strip())
    if isinstance(current, bool):
        return text.lower() in ("1", "true", "yes")
    if isinstance(current, int):
        f = float(text)
        if f != int(f):
            raise ValueError("expected an integer")
        return int(f)
    if isinstance(current, float):
        return float(text)
    return text


def _unknown(what, name, choices):
    close = difflib.get_close_matches(str(name), list(choices), n=3)
    hint = f" (did you mean {', '.join(close)}?)" if close else ""
    return f"unknown {what} {name!r}{hint}; choose from {', '.join(choices)}"


# ---- initial conditions ---------------------------------------------------

def _gaussian_cosine_pulse(mesh, wavenumber=10 * np.pi, width=100.0, center=0.0):
    x = mesh[-1] - center
    env = np.exp(-width * x ** 2)
    return np.cos(wavenumber * x) * env, np.zeros_like(x)


def _plane_wave(mesh, width=50.0, shift=0.5, velocity_amplitude=100.0):
    x = mesh[-1] + shift
    env = np.exp(-width * x ** 2)
    return env, velocity_amplitude * env


def _modulated_plane_wave(mesh, wavenumber=4 * np.pi, width=50.0, shift=0.5):
    x = mesh[-1] + shift
    env = np.exp(-width * x ** 2)
    u = np.cos(wavenumber * x) * env
    ut = (-wavenumber * np.sin(wavenumber * x) + 2 * width * x * np.cos(wavenumber * x)) * env
    return u, ut


def _radial_pulse(mesh, wavenumber=0.01, width=1.6e-5, y0=400.0, x0=3880.0):
    if len(mesh) == 1:
        r2 = (mesh[0] - x0) ** 2
    else:
        r2 = (mesh[0] - y0) ** 2 + (mesh[1] - x0) ** 2
    return np.cos(wavenumber * np.sqrt(r2)) * np.exp(-width * r2), np.zeros_like(r2)


INITIAL_CONDITIONS = {
    "gaussian-cosine-pulse": _gaussian_cosine_pulse,
    "plane-wave": _plane_wave,
    "modulated-plane-wave": _modulated_plane_wave,
    "radial-pulse": _radial_pulse,
}


# ---- speed models ---------------------------------------------------------

def _constant(mesh, value=1.0):
    return np.full(mesh[0].shape, float(value))


def _cosine_1d(mesh, mean=1.0, amplitude=0.25, frequency=2.0):
    return mean + amplitude * np.cos(2 * np.pi * frequency * mesh[-1])


def _waveguide(mesh, mean=1.0, amplitude=-0.3, frequency=1.0):
    return mean + amplitude * np.cos(2 * np.pi * frequency * mesh[0])


def _inclusion(mesh, background=1.0, contrast=0.9, radius2=0.002, cx=0.5, cy=-0.1):
    y, x = mesh[0], mesh[-1]
    inside = (x - cx) ** 2 + (y - cy) ** 2 < radius2
    return background - contrast * inside


def _marmousi_synthetic(mesh, water_depth=200.0, vmin=1500.0, vmax=5500.0, depth=3025.0, width=9200.0):
    """Layered, faulted stand-in for the Marmousi model (no data file needed).

    Dipping sediment layers whose speed grows with depth, offset across two
    normal faults, under a water layer.
    """
    if len(mesh) == 1:
        z = np.zeros_like(mesh[0]) + 0.5 * depth
        x = mesh[0]
    else:
        z, x = mesh
    xs = x / width
    throw = 150.0 * (xs > 0.35) + 120.0 * (xs > 0.62)
    zz = z - 0.12 * depth * xs - throw + 60.0 * np.sin(6 * np.pi * xs)
    frac = np.clip(zz / depth, 0.0, 1.0)
    layers = np.floor(frac * 12) / 12
    v = vmin + 300.0 + (vmax - vmin - 300.0) * (0.7 * layers + 0.3 * frac)
    return np.where(z < water_depth, vmin, v)


SPEED_MODELS = {
    "constant": _constant,
    "cosine-1d": _cosine_1d,
    "waveguide": _waveguide,
    "inclusion": _inclusion,
    "marmousi-synthetic": _marmousi_synthetic,
}


def ingest_speed_model(path, target=None) -> SpeedField:
    """Read a speed file and resample it (bilinearly) onto ``target``.

    ``target`` is a :class:`Grid`, a shape tuple (the file's physical extent
    is kept and the spacing adjusted, origin at zero) or None for the file's
    own grid. A single-row file describes a 1D model.
    """
    values, (dy, dx) = read_speed_file(path)
    one_d = values.shape[0] == 1
    if one_d:
        values = values[0]
    if target is None:
        target = values.shape
    if not isinstance(target, Grid):
        shape = tuple(int(n) for n in target)
        if one_d and len(shape) == 2:
            if shape[0] != 1:
                raise SpeedFileError(f"{path}: a single-row file can only be resampled to ny=1")
            shape = shape[1:]
        spacing = (dx * values.shape[0] / shape[0],) if one_d else \
            (dy * values.shape[0] / shape[0], dx * values.shape[1] / shape[1])
        try:
            target = Grid(shape, spacing)
        except ValueError as exc:
            raise SpeedFileError(f"{path}: bad target grid {shape}: {exc}") from exc
    if (target.dim == 1) != one_d:
        raise SpeedFileError(f"{path}: a {target.dim}D target needs a "
                             f"{'single-row' if target.dim == 1 else 'multi-row'} file")
    field_ = SpeedField(target, bilinear_resize(values, target.shape))
    log.info("speed model %s: min %.6g, max %.6g", path, field_.cmin, field_.cmax)
    return field_


def build_speed(cfg: ExperimentConfig, grid: Grid) -> SpeedField:
    if cfg.speed.startswith("file:"):
        return ingest_speed_model(cfg.speed[5:], grid)
    return SpeedField(grid, SPEED_MODELS[cfg.speed](grid.mesh(), **cfg.speed_params))


def build_problem(cfg: ExperimentConfig) -> tuple[WaveState, CouplingSchedule]:
    cfg.validate()
    coarse = cfg.coarse_grid()
    fine = coarse.refine(cfg.ratio)
    speed = build_speed(cfg, fine)
    mc = cfg.coarse_steps()
    schedule = CouplingSchedule.build(coarse, speed, T=cfg.T, dt_com=cfg.dt_com, coarse_steps=mc,
                                      fine_steps=mc * cfg.fine_time_ratio, interp_kind=cfg.interp)
    try:
        u, ut = INITIAL_CONDITIONS[cfg.initial](fine.mesh(), **cfg.initial_params)
    except TypeError as exc:
        raise ConfigError(f"bad initial_params for {cfg.initial}: {exc}") from exc
    return WaveState(fine, u, ut), schedule


# ---- presets ----------------------------------------------------------------

_SIX = dict(dimension=1, extent=(1.0,), origin=(-0.5,), initial="gaussian-cosine-pulse",
            speed="constant", dt_com=0.05, dx=0.01, cfl=0.5, ratio=1, m_t=20, interp="fourier")

_PRESETS = {
    "rank-tolerance": dict(_SIX, T=5.0, scheme="fd2", tol=1e-15, K=15, variant="theta"),
    "omega-identity": dict(_SIX, T=2.5, scheme="fd2", tol=1e-14, K=15, variant="omega-identity"),
    "gradient-order": dict(_SIX, T=10.0, scheme="fd2", tol=1e-14, K=10, variant="theta"),
    "singular-removal": dict(_SIX, T=10.0, scheme="fd2", tol=1e-14, K=10, variant="theta",
                             remove_count=0),
    "no-correction": dict(_SIX, T=10.0, scheme="fd4", tol=1e-14, K=8,
                          variant="corrected-coarse-only"),
    "interpolation": dict(_SIX, T=10.0, ratio=10, m_t=200, scheme="fd4", tol=1e-14, K=10,
                          variant="theta"),
    "oned-variable": dict(_SIX, speed="cosine-1d", T=10.0, ratio=10, m_t=100, scheme="fd4",
                          tol=1e-14, K=10, variant="theta"),
    "waveguide": dict(dimension=2, extent=(1.0, 2.0), origin=(-0.5, -1.0), initial="plane-wave",
                      speed="waveguide", T=5.0, dt_com=0.05, dx=0.005, cfl=0.25, ratio=1,
                      cfl_ratio=5.0, interp="fourier", scheme="fd4", tol=1e-13, K=10,
                      variant="theta"),
    "inclusion": dict(dimension=2, extent=(1.0, 2.0), origin=(-0.5, -1.0),
                      initial="modulated-plane-wave", speed="inclusion", T=4.0, dt_com=0.02,
                      dx=0.005, cfl=0.5, ratio=1, cfl_ratio=5.0, interp="fourier", scheme="fd4",
                      tol=1e-13, K=10, variant="theta"),
    # Same-grid Marmousi table (6.245 m, 485 x 1474) resampled to 25 m / 121 x 368.
    # The time step is raised to a CFL number of ~0.28 at 5500 m/s so that a
    # coupling interval is 40 coarse steps instead of 2500.
    "marmousi-small": dict(dimension=2, extent=(3025.0, 9200.0), origin=(0.0, 0.0),
                           initial="radial-pulse", speed="marmousi-synthetic", T=2.0,
                           dt_com=0.05, dx=25.0, cfl=5e-5, ratio=1, m_t=10, interp="fourier",
                           scheme="fd4", tol=1e-10, K=6, variant="theta"),
}

# Parameter each study sweeps in its table; the preset holds the first value.
PRESET_SWEEPS = {
    "rank-tolerance": ("tol", [1e-15, 1e-12, 1e-9, 1e-6, 1e-3]),
    "omega-identity": ("T", [2.5, 5.0, 10.0, 50.0]),
    "gradient-order": ("scheme", ["fd2", "fd4", "fd6", "fd8", "spectral"]),
    "singular-removal": ("remove_count", [0, 1, 3, 5]),
    "interpolation": ("interp", ["fourier", "linear"]),
    "oned-variable": ("variant", ["theta", "plain"]),
    "waveguide": ("ratio", [1, 5, 10]),
    "inclusion": ("ratio", [1, 5]),
}

PRESET_NAMES = tuple(_PRESETS)
_ALIASES = {"plain-vs-theta-1d-variable": "oned-variable", "oneD-variable": "oned-variable"}


def preset(name: str) -> ExperimentConfig:
    name = _ALIASES.get(name, name)
    if name not in _PRESETS:
        raise ConfigError(_unknown("preset", name, PRESET_NAMES))
    return ExperimentConfig(name=name, out=f"runs/{name}", **_PRESETS[name])


def preset_sweep(name: str) -> list[ExperimentConfig]:
    base = preset(name)
    name = base.name
    if name not in PRESET_SWEEPS:
        return [base]
    key, values = PRESET_SWEEPS[name]
    return [dataclasses.replace(base, **{key: v}, out=f"{base.out}/{key}={v}") for v in values]


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_text(text)


# ---- running ----------------------------------------------------------------

@dataclass
class ExperimentResult:
    config: ExperimentConfig
    run: ParaRun
    files: dict
    seconds: float

    @property
    def diverged(self) -> bool:
        return self.run.diverged


def execute(cfg: ExperimentConfig, workers: int | None = None) -> ParaRun:
    """Run the parareal variant a config describes without writing files."""
    init, schedule = build_problem(cfg)
    return run_variant(cfg.variant, init, schedule, cfg.K, scheme=cfg.scheme, tol=cfg.tol,
                       remove_leading=cfg.remove_count, workers=workers, keep_states=False)


def run_experiment(cfg: ExperimentConfig, workers: int | None = None,
                   out: str | Path | None = None) -> ExperimentResult:
    """Run a config and write its CSV tables into ``out`` (default ``cfg.out``).

    All validation (including reading a speed file) happens before the
    output directory is touched.
    """
    cfg.validate()
    init, schedule = build_problem(cfg)
    t0 = time.perf_counter()
    run = run_variant(cfg.variant, init, schedule, cfg.K, scheme=cfg.scheme, tol=cfg.tol,
                      remove_leading=cfg.remove_count, workers=workers, keep_states=False)
    seconds = time.perf_counter() - t0
    files = write_run(run, cfg, Path(out or cfg.out), seconds)
    return ExperimentResult(cfg, run, files, seconds)


def singular_removal_run(cfg: ExperimentConfig, remove_count: int, workers: int | None = None,
                         out=None) -> ExperimentResult:
    """Theta run whose corrector drops its ``remove_count`` leading singular triplets."""
    if remove_count < 0:
        raise ConfigError("remove_count must be nonnegative")
    cfg = dataclasses.replace(cfg, variant="theta", remove_count=int(remove_count))
    return run_experiment(cfg, workers=workers, out=out)


def _fmt(x) -> str:
    return repr(float(x))


def write_run(run: ParaRun, cfg: ExperimentConfig, out: Path, seconds: float = 0.0) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    files = {name: out / name for name in
             ("errors.csv", "residuals.csv", "summary.csv", "config.txt", "metadata.json")}
    with open(files["errors.csv"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "coupling", "energy_error", "l2_error"])
        for it in run.iterations:
            for n, (e, l2) in enumerate(zip(it.energy_errors, it.l2_errors)):
                w.writerow([it.k, n, _fmt(e), _fmt(l2)])
    with open(files["residuals.csv"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "relative_residual", "rank"])
        for k, res, rank in run.residuals():
            w.writerow([k, _fmt(res), rank])
    with open(files["summary.csv"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "energy_error", "l2_error", "diverged"])
        for it in run.iterations:
            w.writerow([it.k, _fmt(it.final_energy_error), _fmt(it.final_l2_error), int(it.diverged)])
    files["config.txt"].write_text(cfg.to_text())
    s = run.schedule
    meta = {
        "name": cfg.name,
        "variant": run.variant,
        "fine_grid": list(s.fine.grid.shape),
        "coarse_grid": list(s.coarse.grid.shape),
        "fine_steps_per_coupling": s.fine.steps_per_coupling,
        "coarse_steps_per_coupling": s.coarse.steps_per_coupling,
        "couplings": s.N,
        "speed_min": s.fine_speed.cmin,
        "speed_max": s.fine_speed.cmax,
        "diverged": run.diverged,
        "seconds": seconds,
    }
    files["metadata.json"].write_text(json.dumps(meta, indent=2) + "\n")
    return files
