"""Second-order finite differences in space, velocity Verlet in time."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, SpeedField, WaveState, _same_grid


class PropagationDiverged(FloatingPointError):
    """Propagation produced NaN or Inf (CFL violation or corrupt data)."""


class CFLViolation(ValueError):
    pass


def laplacian(field: np.ndarray, grid: Grid) -> np.ndarray:
    """Periodic 3-point Laplacian summed over the trailing ``grid.dim`` axes.

    Leading axes, if any, are a batch of independent fields.
    """
    f = np.asarray(field, dtype=float)
    if f.shape[f.ndim - grid.dim:] != grid.shape:
        raise ValueError(f"field shape {f.shape} does not match grid {grid.shape}")
    out = np.zeros_like(f)
    for k, h in enumerate(grid.spacing):
        axis = f.ndim - grid.dim + k
        out += (np.roll(f, 1, axis) - 2 * f + np.roll(f, -1, axis)) / (h * h)
    return out


@dataclass(frozen=True)
class PropagatorConfig:
    """One propagator: grid, medium, step and steps per coupling interval.

    ``dt_com`` is optional; when given, ``steps_per_coupling * dt`` must
    match it.
    """

    grid: Grid
    speed: SpeedField
    dt: float
    steps_per_coupling: int
    dt_com: float | None = None
    laplacian_order: int = 2

    def __post_init__(self):
        _same_grid(self.grid, self.speed.grid)
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if int(self.steps_per_coupling) != self.steps_per_coupling or self.steps_per_coupling < 1:
            raise ValueError(f"steps_per_coupling must be a positive integer, got {self.steps_per_coupling}")
        object.__setattr__(self, "steps_per_coupling", int(self.steps_per_coupling))
        if self.laplacian_order != 2:
            raise ValueError("only the second-order Laplacian is supported")
        if self.cfl > 1 / np.sqrt(self.grid.dim) * (1 + 1e-12):
            raise CFLViolation(
                f"CFL number {self.cfl:.4g} exceeds 1/sqrt({self.grid.dim}); reduce dt")
        if self.dt_com is not None and not np.isclose(
                self.steps_per_coupling * self.dt, self.dt_com, rtol=1e-12, atol=0):
            raise ValueError(
                f"{self.steps_per_coupling} steps of {self.dt} do not cover dt_com={self.dt_com}")

    @classmethod
    def for_interval(cls, grid: Grid, speed: SpeedField, dt_com: float, steps: int) -> "PropagatorConfig":
        return cls(grid, speed, dt_com / steps, steps, dt_com)

    @property
    def cfl(self) -> float:
        return self.dt * self.speed.cmax / min(self.grid.spacing)


def _verlet(u, udot, c2, grid, dt, nsteps):
    a = c2 * laplacian(u, grid)
    half = 0.5 * dt
    for _ in range(nsteps):
        u = u + dt * udot + (half * dt) * a
        a_new = c2 * laplacian(u, grid)
        udot = udot + half * (a + a_new)
        a = a_new
    return u, udot


def step(state: WaveState, cfg: PropagatorConfig) -> WaveState:
    """Advance one velocity-Verlet step of ``u_tt = c^2 Lap(u)``."""
    return _advance(state, cfg, 1)


def propagate_coupling(state: WaveState, cfg: PropagatorConfig) -> WaveState:
    """Advance ``state`` over one coupling interval (``steps_per_coupling`` steps)."""
    return _advance(state, cfg, cfg.steps_per_coupling)


def _advance(state, cfg, nsteps):
    _same_grid(state.grid, cfg.grid)
    with np.errstate(over="ignore", invalid="ignore"):
        u, udot = _verlet(state.u, state.udot, cfg.speed.c ** 2, cfg.grid, cfg.dt, nsteps)
    if not (np.isfinite(u).all() and np.isfinite(udot).all()):
        raise PropagationDiverged("propagation produced non-finite values")
    return WaveState(state.grid, u, udot)


def propagate_batch(u: np.ndarray, udot: np.ndarray, cfg: PropagatorConfig) -> tuple[np.ndarray, np.ndarray]:
    """Advance a stack of states (leading axis = batch) over one coupling interval.

    Each batch member evolves independently, and the arithmetic is
    elementwise, so the result for a member does not depend on what else is
    in the batch. Non-finite values are returned as-is for the caller to flag.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        return _verlet(np.asarray(u, float), np.asarray(udot, float),
                       cfg.speed.c ** 2, cfg.grid, cfg.dt, cfg.steps_per_coupling)


def reverse(state: WaveState) -> WaveState:
    """Flip the velocity; propagating a reversed state runs time backwards."""
    return WaveState(state.grid, state.u, -state.udot)

