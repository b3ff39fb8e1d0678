"""Energy components of a wave state, their inverse, and error metrics.

The energy components of ``(u, udot)`` are the discrete gradient of ``u``
(one block per axis) and the weighted momentum ``udot / c``. Their squared
Euclidean norm times ``cell_volume / 2`` is the discrete wave energy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, SpeedField, WaveState, _same_grid

# Antisymmetric central-difference weights: df/dx ~ sum_j b_j (f[i+j] - f[i-j]) / h
FD_COEFFICIENTS = {
    "fd2": (1 / 2,),
    "fd4": (2 / 3, -1 / 12),
    "fd6": (3 / 4, -3 / 20, 1 / 60),
    "fd8": (4 / 5, -1 / 5, 4 / 105, -1 / 280),
}
SCHEMES = tuple(FD_COEFFICIENTS) + ("spectral",)


@dataclass(frozen=True)
class GradientScheme:
    kind: str = "fd2"

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown gradient scheme {self.kind!r}; choose from {SCHEMES}")

    def symbol(self, xi: np.ndarray, h: float) -> np.ndarray:
        """Modified wavenumber: the scheme maps ``e^{i xi x}`` to ``i*symbol*e^{i xi x}``."""
        xi = np.asarray(xi, dtype=float)
        if self.kind == "spectral":
            return xi
        return 2 / h * sum(b * np.sin((j + 1) * xi * h)
                           for j, b in enumerate(FD_COEFFICIENTS[self.kind]))


def _as_scheme(scheme) -> GradientScheme:
    return scheme if isinstance(scheme, GradientScheme) else GradientScheme(scheme)


def gradient(u: np.ndarray, grid: Grid, scheme="fd2") -> np.ndarray:
    """Discrete gradient over the trailing grid axes.

    Returns an array of shape ``batch + (dim,) + grid.shape``. The spectral
    derivative zeroes the Nyquist mode, which has no real derivative.
    """
    scheme = _as_scheme(scheme)
    u = np.asarray(u, dtype=float)
    lead = u.ndim - grid.dim
    if u.shape[lead:] != grid.shape:
        raise ValueError(f"field shape {u.shape} does not match grid {grid.shape}")
    blocks = []
    for k, (n, h) in enumerate(zip(grid.shape, grid.spacing)):
        axis = lead + k
        if scheme.kind == "spectral":
            xi = 2 * np.pi * np.fft.fftfreq(n, d=h)
            if n % 2 == 0:
                xi[n // 2] = 0.0
            shape = [1] * u.ndim
            shape[axis] = n
            g = np.fft.ifft(1j * xi.reshape(shape) * np.fft.fft(u, axis=axis), axis=axis).real
        else:
            g = np.zeros_like(u)
            for j, b in enumerate(FD_COEFFICIENTS[scheme.kind], start=1):
                g += b * (np.roll(u, -j, axis) - np.roll(u, j, axis))
            g /= h
        blocks.append(g)
    return np.stack(blocks, axis=lead)


@dataclass(frozen=True)
class EnergyComponents:
    """Gradient blocks, weighted momentum and the sum of ``u``."""

    grid: Grid
    grad: np.ndarray
    momentum: np.ndarray
    mean_u: float

    def __post_init__(self):
        grad = np.asarray(self.grad, dtype=float)
        if grad.shape != (self.grid.dim,) + self.grid.shape:
            raise ValueError(f"gradient blocks have shape {grad.shape}")
        object.__setattr__(self, "grad", grad)
        object.__setattr__(self, "momentum", self.grid.check(self.momentum, "momentum"))
        object.__setattr__(self, "mean_u", float(self.mean_u))

    def stacked(self) -> np.ndarray:
        """Column layout ``[grad axis 0; ...; grad axis d-1; momentum]``."""
        return np.concatenate([self.grad.ravel(), self.momentum.ravel()])

    @classmethod
    def from_stacked(cls, grid: Grid, vec: np.ndarray, mean_u: float) -> "EnergyComponents":
        vec = np.asarray(vec, dtype=float)
        n = grid.size
        if vec.shape != ((grid.dim + 1) * n,):
            raise ValueError(f"stacked vector has length {vec.shape}, expected {(grid.dim + 1) * n}")
        return cls(grid, vec[:grid.dim * n].reshape((grid.dim,) + grid.shape),
                   vec[grid.dim * n:].reshape(grid.shape), mean_u)


def to_components(state: WaveState, speed: SpeedField, scheme="fd2") -> EnergyComponents:
    """The map ``(u, udot) -> (grad_h u, udot / c)``, carrying ``sum(u)`` along."""
    _same_grid(state.grid, speed.grid)
    return EnergyComponents(state.grid, gradient(state.u, state.grid, scheme),
                            state.udot / speed.c, float(state.u.sum()))


def stacked_components(u: np.ndarray, udot: np.ndarray, speed: SpeedField, scheme="fd2") -> np.ndarray:
    """Batched ``to_components(...).stacked()``: one column per leading index."""
    grid = speed.grid
    u = np.asarray(u, dtype=float)
    batch = u.shape[:u.ndim - grid.dim]
    g = gradient(u, grid, scheme).reshape(batch + (-1,))
    m = (np.asarray(udot, dtype=float) / speed.c).reshape(batch + (-1,))
    return np.concatenate([g, m], axis=-1)


def reconstruct_displacement(grad: np.ndarray, grid: Grid, total) -> np.ndarray:
    """Recover ``u`` from a gradient field by Fourier division.

    Nonzero modes get ``-i (xi . g_hat) / |xi|^2``; the zero mode is set to
    ``total`` so that ``u.sum() == total`` (unnormalized forward DFT).
    ``grad`` may carry leading batch axes before the ``(dim,) + shape``
    block, with ``total`` then an array of matching batch shape.
    """
    grad = np.asarray(grad, dtype=float)
    lead = grad.ndim - grid.dim - 1
    if grad.shape[lead:] != (grid.dim,) + grid.shape:
        raise ValueError(f"gradient shape {grad.shape} does not match grid {grid.shape}")
    axes = tuple(range(lead + 1, grad.ndim))
    ghat = np.moveaxis(np.fft.fftn(grad, axes=axes), lead, 0)
    xis = np.meshgrid(*grid.wavenumbers(), indexing="ij")
    xi2 = sum(xi * xi for xi in xis)
    nz = xi2 > 0
    inv = np.zeros(grid.shape)
    inv[nz] = 1.0 / xi2[nz]
    dot = sum(xi * ghat[k] for k, xi in enumerate(xis))
    uhat = -1j * dot * inv
    uhat[(...,) + (0,) * grid.dim] = total
    return np.fft.ifftn(uhat, axes=tuple(range(lead, lead + grid.dim))).real


def from_components(comp: EnergyComponents, speed: SpeedField) -> WaveState:
    """Inverse map: ``udot = c * momentum`` and ``u`` rebuilt from the gradient."""
    _same_grid(comp.grid, speed.grid)
    u = reconstruct_displacement(comp.grad, comp.grid, comp.mean_u)
    return WaveState(comp.grid, u, speed.c * comp.momentum)


def energy(state: WaveState, speed: SpeedField, scheme="fd2") -> float:
    """Discrete wave energy ``(|grad_h u|^2 + |udot/c|^2) * cell_volume / 2``."""
    _same_grid(state.grid, speed.grid)
    g = gradient(state.u, state.grid, scheme)
    m = state.udot / speed.c
    return 0.5 * state.grid.cell_volume * float(np.sum(g * g) + np.sum(m * m))


def energies(u: np.ndarray, udot: np.ndarray, speed: SpeedField, scheme="fd2") -> np.ndarray:
    """Energy of each member of a batch of states (leading axes = batch)."""
    grid = speed.grid
    u = np.asarray(u, dtype=float)
    axes = tuple(range(u.ndim - grid.dim, u.ndim))
    g = gradient(u, grid, scheme)
    m = np.asarray(udot, dtype=float) / speed.c
    gsum = np.sum(g * g, axis=(u.ndim - grid.dim,) + tuple(a + 1 for a in axes))
    return 0.5 * grid.cell_volume * (gsum + np.sum(m * m, axis=axes))


def component_energy(comp: EnergyComponents) -> float:
    v = comp.stacked()
    return 0.5 * comp.grid.cell_volume * float(v @ v)


class UndefinedReferenceError(ZeroDivisionError):
    """Relative error requested against a reference with zero norm."""


def energy_error(a: WaveState, b: WaveState, speed: SpeedField, scheme="fd2") -> float:
    """``sqrt(E(a - b) / E(b))``."""
    eb = energy(b, speed, scheme)
    if eb == 0:
        raise UndefinedReferenceError("reference state has zero energy")
    return float(np.sqrt(energy(a - b, speed, scheme) / eb))


def l2_error(a: WaveState, b: WaveState) -> float:
    """``||u_a - u_b||_2 / ||u_b||_2`` on the displacement only."""
    _same_grid(a.grid, b.grid)
    nb = np.linalg.norm(b.u)
    if nb == 0:
        raise UndefinedReferenceError("reference displacement is zero")
    return float(np.linalg.norm(a.u - b.u) / nb)
