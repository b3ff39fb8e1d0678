"""Periodic grids, wave states, speed fields and coarse/fine transfer.

Fields are numpy arrays shaped ``grid.shape`` (C order). In 2D axis 0 is
``y`` and axis 1 is ``x``; flattening with ``ravel()`` gives the row-major
layout used by the energy components and the speed-file format.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class GridMismatchError(ValueError):
    """A field or state does not live on the grid an operation expects."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on a box of ``shape[a] * spacing[a]`` per axis."""

    shape: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: tuple[float, ...] = None

    def __post_init__(self):
        shape = tuple(int(n) for n in np.atleast_1d(self.shape))
        spacing = tuple(float(h) for h in np.atleast_1d(self.spacing))
        if len(spacing) == 1 and len(shape) > 1:
            spacing = spacing * len(shape)
        if len(shape) not in (1, 2):
            raise ValueError(f"only 1D and 2D grids are supported, got shape {shape}")
        if len(spacing) != len(shape):
            raise ValueError("spacing must have one entry per axis")
        if any(n < 4 for n in shape):
            raise ValueError(f"need at least 4 points per axis, got {shape}")
        if any(not (h > 0 and np.isfinite(h)) for h in spacing):
            raise ValueError(f"spacing must be positive, got {spacing}")
        origin = (0.0,) * len(shape) if self.origin is None else tuple(
            float(o) for o in np.atleast_1d(self.origin))
        if len(origin) != len(shape):
            raise ValueError("origin must have one entry per axis")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def extent(self) -> tuple[float, ...]:
        return tuple(n * h for n, h in zip(self.shape, self.spacing))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axes(self) -> list[np.ndarray]:
        return [o + h * np.arange(n) for n, h, o in zip(self.shape, self.spacing, self.origin)]

    def mesh(self) -> list[np.ndarray]:
        """Coordinate arrays, one per axis, each shaped like the grid."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def wavenumbers(self) -> list[np.ndarray]:
        """Angular wavenumbers per axis in numpy FFT order."""
        return [2 * np.pi * np.fft.fftfreq(n, d=h) for n, h in zip(self.shape, self.spacing)]

    def refine(self, ratio: int | Sequence[int]) -> "Grid":
        r = _ratio_tuple(ratio, self.dim)
        return Grid(tuple(n * m for n, m in zip(self.shape, r)),
                    tuple(h / m for h, m in zip(self.spacing, r)), self.origin)

    def coarsen(self, ratio: int | Sequence[int]) -> "Grid":
        r = _ratio_tuple(ratio, self.dim)
        if any(n % m for n, m in zip(self.shape, r)):
            raise GridMismatchError(f"shape {self.shape} is not divisible by ratio {r}")
        return Grid(tuple(n // m for n, m in zip(self.shape, r)),
                    tuple(h * m for h, m in zip(self.spacing, r)), self.origin)

    def check(self, arr: np.ndarray, what: str = "field") -> np.ndarray:
        arr = np.asarray(arr, dtype=float)
        if arr.shape != self.shape:
            raise GridMismatchError(f"{what} has shape {arr.shape}, grid expects {self.shape}")
        return arr


def _ratio_tuple(ratio, dim):
    r = tuple(int(m) for m in np.atleast_1d(ratio))
    if len(r) == 1:
        r = r * dim
    if len(r) != dim or any(m < 1 for m in r):
        raise ValueError(f"invalid ratio {ratio!r} for a {dim}D grid")
    return r


@dataclass(frozen=True)
class WaveState:
    """Displacement ``u`` and its time derivative ``udot`` on a grid."""

    grid: Grid
    u: np.ndarray
    udot: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", self.grid.check(self.u, "u"))
        object.__setattr__(self, "udot", self.grid.check(self.udot, "udot"))

    @classmethod
    def zeros(cls, grid: Grid) -> "WaveState":
        return cls(grid, np.zeros(grid.shape), np.zeros(grid.shape))

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.u).all() and np.isfinite(self.udot).all())

    def __add__(self, other: "WaveState") -> "WaveState":
        _same_grid(self.grid, other.grid)
        return WaveState(self.grid, self.u + other.u, self.udot + other.udot)

    def __sub__(self, other: "WaveState") -> "WaveState":
        _same_grid(self.grid, other.grid)
        return WaveState(self.grid, self.u - other.u, self.udot - other.udot)

    def __mul__(self, alpha: float) -> "WaveState":
        return WaveState(self.grid, alpha * self.u, alpha * self.udot)

    __rmul__ = __mul__


@dataclass(frozen=True)
class SpeedField:
    grid: Grid
    c: np.ndarray

    def __post_init__(self):
        c = self.grid.check(self.c, "speed")
        if not np.isfinite(c).all():
            raise ValueError("speed field has non-finite entries")
        if c.min() <= 0:
            raise ValueError(f"speed must be strictly positive, min is {c.min()}")
        object.__setattr__(self, "c", c)

    @classmethod
    def constant(cls, grid: Grid, value: float = 1.0) -> "SpeedField":
        return cls(grid, np.full(grid.shape, float(value)))

    @property
    def cmax(self) -> float:
        return float(self.c.max())

    @property
    def cmin(self) -> float:
        return float(self.c.min())


def _same_grid(a: Grid, b: Grid):
    if a.shape != b.shape or not np.allclose(a.spacing, b.spacing, rtol=1e-12, atol=0):
        raise GridMismatchError(f"grid mismatch: {a.shape}/{a.spacing} vs {b.shape}/{b.spacing}")


@dataclass(frozen=True)
class GridTransfer:
    """Nested coarse/fine grid pair; coarse node ``j`` sits on fine node ``ratio*j``."""

    coarse: Grid
    fine: Grid
    interp_kind: str = "fourier"
    ratio: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if self.interp_kind not in ("fourier", "linear"):
            raise ValueError(f"interp_kind must be 'fourier' or 'linear', got {self.interp_kind!r}")
        if self.coarse.dim != self.fine.dim:
            raise GridMismatchError("coarse and fine grids differ in dimension")
        ratio = []
        for nc, nf, hc, hf in zip(self.coarse.shape, self.fine.shape,
                                  self.coarse.spacing, self.fine.spacing):
            if nf % nc:
                raise GridMismatchError(f"fine points {nf} not a multiple of coarse points {nc}")
            m = nf // nc
            if not np.isclose(hc, m * hf, rtol=1e-9, atol=0):
                raise GridMismatchError(f"spacings {hc} and {hf} are not nested with ratio {m}")
            ratio.append(m)
        if not np.allclose(self.coarse.origin, self.fine.origin, rtol=0, atol=1e-12 * max(self.fine.extent)):
            raise GridMismatchError("coarse and fine grids must share the origin node")
        object.__setattr__(self, "ratio", tuple(ratio))

    @classmethod
    def from_ratio(cls, coarse: Grid, ratio, interp_kind: str = "fourier") -> "GridTransfer":
        return cls(coarse, coarse.refine(ratio), interp_kind)

    @property
    def identity(self) -> bool:
        return all(m == 1 for m in self.ratio)


def restrict(obj, transfer: GridTransfer):
    """Pointwise injection from the fine grid to the coarse grid.

    Accepts a ``WaveState``, a ``SpeedField`` or a bare array on the fine
    grid (extra leading axes are treated as a batch).
    """
    if isinstance(obj, WaveState):
        _same_grid(obj.grid, transfer.fine)
        return WaveState(transfer.coarse, _inject(obj.u, transfer), _inject(obj.udot, transfer))
    if isinstance(obj, SpeedField):
        _same_grid(obj.grid, transfer.fine)
        return SpeedField(transfer.coarse, _inject(obj.c, transfer))
    arr = np.asarray(obj, dtype=float)
    if arr.shape[arr.ndim - transfer.fine.dim:] != transfer.fine.shape:
        raise GridMismatchError(f"field of shape {arr.shape} does not live on fine grid {transfer.fine.shape}")
    return _inject(arr, transfer)


def _inject(arr, transfer):
    lead = (slice(None),) * (arr.ndim - transfer.fine.dim)
    return arr[lead + tuple(slice(None, None, m) for m in transfer.ratio)].copy()


def interpolate(obj, transfer: GridTransfer):
    """Interpolate a coarse field (or ``WaveState``) onto the fine grid.

    ``fourier`` zero-pads the DFT spectrum per axis, splitting an unmatched
    Nyquist coefficient evenly between the two signed frequencies;
    ``linear`` is periodic piecewise (bi)linear. Both reproduce the input
    at shared nodes.
    """
    if isinstance(obj, WaveState):
        _same_grid(obj.grid, transfer.coarse)
        return WaveState(transfer.fine, interpolate(obj.u, transfer), interpolate(obj.udot, transfer))
    arr = np.asarray(obj, dtype=float)
    dim = transfer.coarse.dim
    if arr.shape[arr.ndim - dim:] != transfer.coarse.shape:
        raise GridMismatchError(f"field of shape {arr.shape} does not live on coarse grid {transfer.coarse.shape}")
    out = arr
    for k, m in enumerate(transfer.ratio):
        if m == 1:
            continue
        axis = arr.ndim - dim + k
        if transfer.interp_kind == "fourier":
            out = _fourier_axis(out, m, axis)
        else:
            out = _linear_axis(out, m, axis)
    return out.copy() if out is arr else out


def _fourier_axis(a, m, axis):
    n = a.shape[axis]
    spec = np.fft.fft(a, axis=axis)
    spec = np.moveaxis(spec, axis, -1)
    padded = np.zeros(spec.shape[:-1] + (n * m,), dtype=complex)
    half = n // 2
    if n % 2:
        padded[..., :half + 1] = spec[..., :half + 1]
        padded[..., -half:] = spec[..., -half:]
    else:
        padded[..., :half] = spec[..., :half]
        if half > 1:
            padded[..., n * m - half + 1:] = spec[..., half + 1:]
        padded[..., half] = 0.5 * spec[..., half]
        padded[..., n * m - half] = 0.5 * spec[..., half]
    out = np.fft.ifft(padded, axis=-1).real * m
    return np.moveaxis(out, -1, axis)


def _linear_axis(a, m, axis):
    a = np.moveaxis(a, axis, -1)
    nxt = np.roll(a, -1, axis=-1)
    w = np.arange(m) / m
    out = a[..., :, None] * (1 - w) + nxt[..., :, None] * w
    out = out.reshape(a.shape[:-1] + (a.shape[-1] * m,))
    return np.moveaxis(out, -1, axis)


def resize_speed(fine_speed: SpeedField, coarse: Grid) -> SpeedField:
    """Evaluate the speed at the coarse nodes (which must be fine nodes)."""
    transfer = GridTransfer(coarse, fine_speed.grid)
    return SpeedField(coarse, _inject(fine_speed.c, transfer))


def bilinear_resize(values: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    """Resample a 1D/2D array to ``shape`` with (bi)linear interpolation.

    Corner samples map to corner samples, as image resizing does. Used only
    to ingest speed models onto non-nested grids.
    """
    values = np.asarray(values, dtype=float)
    shape = tuple(int(n) for n in shape)
    if values.ndim != len(shape):
        raise ValueError(f"cannot resize a {values.ndim}D array to shape {shape}")
    out = values
    for axis, n_new in enumerate(shape):
        n_old = out.shape[axis]
        if n_old == n_new:
            continue
        src = np.linspace(0.0, n_old - 1, n_new) if n_old > 1 else np.zeros(n_new)
        lo = np.clip(np.floor(src).astype(int), 0, max(n_old - 2, 0))
        hi = np.minimum(lo + 1, n_old - 1)
        w = src - lo
        a = np.take(out, lo, axis=axis)
        b = np.take(out, hi, axis=axis)
        bshape = [1] * out.ndim
        bshape[axis] = n_new
        w = w.reshape(bshape)
        out = (1 - w) * a + w * b
    return out


class SpeedFileError(ValueError):
    """Malformed or physically invalid speed-model file."""


def read_speed_file(path) -> tuple[np.ndarray, tuple[float, float]]:
    """Read the text speed format.

    The first line is ``ny nx dy dx``; ``ny`` rows of ``nx`` values follow
    (row index = y). Returns the ``(ny, nx)`` array and ``(dy, dx)``.
    """
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise SpeedFileError(f"cannot read speed file {path}: {exc}") from exc
    if not lines:
        raise SpeedFileError(f"{path}: empty file")
    head = lines[0].split()
    if len(head) != 4:
        raise SpeedFileError(f"{path}: header must be 'ny nx dy dx', got {lines[0]!r}")
    try:
        ny, nx = int(head[0]), int(head[1])
        dy, dx = float(head[2]), float(head[3])
    except ValueError as exc:
        raise SpeedFileError(f"{path}: bad header {lines[0]!r}") from exc
    if ny < 1 or nx < 1 or not (dy > 0 and dx > 0):
        raise SpeedFileError(f"{path}: header values must be positive")
    rows = lines[1:]
    if len(rows) != ny:
        raise SpeedFileError(f"{path}: expected {ny} rows, found {len(rows)}")
    for i, row in enumerate(rows):
        if len(row.split()) != nx:
            raise SpeedFileError(f"{path}: row {i} holds {len(row.split())} values, expected {nx}")
    try:
        data = np.array([[float(v) for v in row.split()] for row in rows], dtype=float)
    except ValueError as exc:
        raise SpeedFileError(f"{path}: non-numeric entry ({exc})") from exc
    if not np.isfinite(data).all():
        raise SpeedFileError(f"{path}: non-finite speed value")
    if (data <= 0).any():
        raise SpeedFileError(f"{path}: speed must be strictly positive (min {data.min()})")
    return data, (dy, dx)


def write_speed_file(path, values: np.ndarray, spacing: Sequence[float]) -> None:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    ny, nx = values.shape
    spacing = tuple(np.atleast_1d(spacing).astype(float))
    dy, dx = (spacing[0], spacing[0]) if len(spacing) == 1 else spacing
    lines = [f"{ny} {nx} {float(dy)!r} {float(dx)!r}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in values]
    Path(path).write_text("\n".join(lines) + "\n")
