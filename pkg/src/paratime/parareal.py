"""Plain and Procrustes-corrected parareal iterations for the wave equation.

Iterates are stored on the fine grid. Iteration ``k = 1`` is the serial
coarse solution ``I C R``; every later iteration runs one parallel pass of
fine and coarse stages from the previous iterate, followed by a serial
sweep. With the additive correction in place, iterate ``k`` reproduces the
serial fine solution at coupling indices ``n <= k - 1``.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .energy import energies, reconstruct_displacement, stacked_components
from .grid import Grid, GridTransfer, SpeedField, WaveState, interpolate, resize_speed, restrict
from .procrustes import PhaseCorrector, relative_residual, update_svd
from .propagator import PropagatorConfig, propagate_batch

log = logging.getLogger(__name__)

VARIANTS = ("plain", "theta", "corrected-coarse-only", "omega-identity")
# an iterate whose relative energy error exceeds this is flagged as diverged
DIVERGENCE_LIMIT = 1e8


@dataclass(frozen=True)
class CouplingSchedule:
    """Time partition ``T = N * dt_com`` and the two propagators bridging it."""

    T: float
    dt_com: float
    N: int
    fine: PropagatorConfig
    coarse: PropagatorConfig
    transfer: GridTransfer

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("need at least one coupling interval")
        if not np.isclose(self.N * self.dt_com, self.T, rtol=1e-12, atol=0):
            raise ValueError(f"N * dt_com = {self.N * self.dt_com} differs from T = {self.T}")
        for name, cfg in (("fine", self.fine), ("coarse", self.coarse)):
            if not np.isclose(cfg.steps_per_coupling * cfg.dt, self.dt_com, rtol=1e-12, atol=0):
                raise ValueError(f"{name} propagator does not span dt_com exactly")
        if self.fine.grid.shape != self.transfer.fine.shape:
            raise ValueError("fine propagator grid differs from transfer.fine")
        if self.coarse.grid.shape != self.transfer.coarse.shape:
            raise ValueError("coarse propagator grid differs from transfer.coarse")

    @classmethod
    def build(cls, coarse_grid: Grid, fine_speed: SpeedField, *, T: float, dt_com: float,
              coarse_steps: int, fine_steps: int, interp_kind: str = "fourier") -> "CouplingSchedule":
        """Assemble a schedule from a fine medium and a nested coarse grid.

        The coarse medium is the fine speed evaluated at the coarse nodes.
        """
        transfer = GridTransfer(coarse_grid, fine_speed.grid, interp_kind)
        coarse_speed = resize_speed(fine_speed, coarse_grid)
        N = int(round(T / dt_com))
        fine = PropagatorConfig.for_interval(fine_speed.grid, fine_speed, dt_com, fine_steps)
        coarse = PropagatorConfig.for_interval(coarse_grid, coarse_speed, dt_com, coarse_steps)
        return cls(T, dt_com, N, fine, coarse, transfer)

    @property
    def fine_speed(self) -> SpeedField:
        return self.fine.speed

    @property
    def coarse_speed(self) -> SpeedField:
        return self.coarse.speed


@dataclass
class Iteration:
    """One parareal iterate: states at every coupling time plus diagnostics."""

    k: int
    u: np.ndarray | None
    udot: np.ndarray | None
    energy_errors: np.ndarray
    l2_errors: np.ndarray
    residual: float | None = None
    rank: int | None = None
    diverged: bool = False

    def state(self, n: int, grid: Grid) -> WaveState:
        if self.u is None:
            raise ValueError("states were not kept for this run")
        return WaveState(grid, self.u[n], self.udot[n])

    @property
    def final_energy_error(self) -> float:
        return float(self.energy_errors[-1])

    @property
    def final_l2_error(self) -> float:
        return float(self.l2_errors[-1])


@dataclass
class ParaRun:
    schedule: CouplingSchedule
    variant: str
    reference_u: np.ndarray
    reference_udot: np.ndarray
    iterations: list[Iteration] = field(default_factory=list)

    def final_energy_errors(self) -> np.ndarray:
        return np.array([it.final_energy_error for it in self.iterations])

    def final_l2_errors(self) -> np.ndarray:
        return np.array([it.final_l2_error for it in self.iterations])

    def residuals(self) -> list[tuple[int, float, int]]:
        return [(it.k, it.residual, it.rank) for it in self.iterations if it.residual is not None]

    @property
    def diverged(self) -> bool:
        return any(it.diverged for it in self.iterations)


def _split_propagate(u, udot, cfg, workers):
    """Propagate a batch, optionally in chunks on a thread pool.

    Chunks write to disjoint slices; the result does not depend on
    ``workers`` because every member evolves independently.
    """
    if workers is None or workers <= 1 or len(u) < 2:
        return propagate_batch(u, udot, cfg)
    out_u = np.empty_like(u)
    out_v = np.empty_like(udot)
    chunks = np.array_split(np.arange(len(u)), min(workers, len(u)))

    def work(idx):
        out_u[idx], out_v[idx] = propagate_batch(u[idx], udot[idx], cfg)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(work, chunks))
    return out_u, out_v


def serial_fine(init: WaveState, schedule: CouplingSchedule) -> list[WaveState]:
    """Reference solution: ``N`` fine coupling propagations in sequence."""
    u, v = _serial(init.u, init.udot, schedule.fine, schedule.N)
    return [WaveState(init.grid, u[n], v[n]) for n in range(schedule.N + 1)]


def _serial(u0, v0, cfg, N):
    us = np.empty((N + 1,) + u0.shape)
    vs = np.empty_like(us)
    us[0], vs[0] = u0, v0
    for n in range(N):
        us[n + 1], vs[n + 1] = propagate_batch(us[n], vs[n], cfg)
    return us, vs


def _coarse_from_fine(u, udot, schedule):
    """``C R`` applied to fine-grid states (batched); returns coarse-grid arrays."""
    t = schedule.transfer
    return propagate_batch(restrict(u, t), restrict(udot, t), schedule.coarse)


def _errors(u, udot, ref_u, ref_v, speed, scheme):
    ref_e = energies(ref_u, ref_v, speed, scheme)
    with np.errstate(all="ignore"):
        de = energies(u - ref_u, udot - ref_v, speed, scheme)
        e_err = np.sqrt(de / ref_e)
        axes = tuple(range(1, u.ndim))
        dl2 = np.sum((u - ref_u) ** 2, axis=axes)
        ref_l2 = np.sum(ref_u ** 2, axis=axes)
        l2 = np.sqrt(dl2 / ref_l2)
    e_err[ref_e == 0] = np.where(de[ref_e == 0] == 0, 0.0, np.inf)
    l2[ref_l2 == 0] = np.where(dl2[ref_l2 == 0] == 0, 0.0, np.inf)
    e_err[~np.isfinite(e_err)] = np.inf
    l2[~np.isfinite(l2)] = np.inf
    return e_err, l2


class _Corrector:
    """The coarse-grid map ``Lambda^+ Omega Lambda`` on batches of states."""

    def __init__(self, schedule, scheme, omega: PhaseCorrector | None):
        self.speed = schedule.coarse_speed
        self.grid = self.speed.grid
        self.scheme = scheme
        self.omega = omega

    def __call__(self, u, udot):
        batch = u.shape[:u.ndim - self.grid.dim]
        comp = stacked_components(u, udot, self.speed, self.scheme)
        if self.omega is not None:
            comp = self.omega.apply(comp.reshape(-1, comp.shape[-1]).T).T.reshape(comp.shape)
        n = self.grid.size
        grad = comp[..., :self.grid.dim * n].reshape(batch + (self.grid.dim,) + self.grid.shape)
        mom = comp[..., self.grid.dim * n:].reshape(batch + self.grid.shape)
        total = u.sum(axis=tuple(range(len(batch), u.ndim)))
        return reconstruct_displacement(grad, self.grid, total), self.speed.c * mom


def _run(init: WaveState, schedule: CouplingSchedule, K: int, variant: str, scheme="fd2",
         tol: float = 1e-14, remove_leading: int = 0, workers: int | None = None,
         keep_states: bool = True, reference=None) -> ParaRun:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    if K < 1:
        raise ValueError("K must be at least 1")
    if init.grid.shape != schedule.fine.grid.shape:
        raise ValueError("initial state must live on the fine grid")
    t = schedule.transfer
    N = schedule.N
    fspeed = schedule.fine_speed
    if reference is None:
        reference = _serial(init.u, init.udot, schedule.fine, N)
    ref_u, ref_v = reference
    run = ParaRun(schedule, variant, ref_u, ref_v)

    # k = 1: serial coarse, interpolated to the fine grid after every interval
    u = np.empty((N + 1,) + init.grid.shape)
    v = np.empty_like(u)
    u[0], v[0] = init.u, init.udot
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, N + 1):
            cu, cv = _coarse_from_fine(u[n - 1], v[n - 1], schedule)
            u[n], v[n] = interpolate(cu, t), interpolate(cv, t)
    diverged = not np.isfinite(u).all() or not np.isfinite(v).all()
    run.iterations.append(_record(1, u, v, reference, fspeed, scheme, keep_states, diverged=diverged))
    u, v = _clamp(u, v, None, None)

    rows = (schedule.coarse.grid.dim + 1) * schedule.coarse.grid.size
    omega = PhaseCorrector.empty(rows, tol)
    for k in range(2, K + 1):
        # parallel stages from the previous iterate
        fu, fv = _split_propagate(u[:-1], v[:-1], schedule.fine, workers)
        cu, cv = _split_propagate(restrict(u[:-1], t), restrict(v[:-1], t), schedule.coarse, workers)
        stage_ok = all(np.isfinite(a).all() for a in (fu, fv, cu, cv))
        residual = rank = None
        active = None
        if variant in ("theta", "corrected-coarse-only", "omega-identity"):
            if variant == "omega-identity":
                active = None
            else:
                F = stacked_components(restrict(fu, t), restrict(fv, t), schedule.coarse_speed, scheme).T
                G = stacked_components(cu, cv, schedule.coarse_speed, scheme).T
                if stage_ok:
                    omega = update_svd(omega, F, G, tol)
                active = omega.drop_leading(remove_leading) if remove_leading else omega
                residual = relative_residual(active, F, G) if stage_ok else float("nan")
                rank = active.rank
            theta = _Corrector(schedule, scheme, active)

        new_u = np.empty_like(u)
        new_v = np.empty_like(v)
        new_u[0], new_v[0] = init.u, init.udot
        with np.errstate(over="ignore", invalid="ignore"):
            if variant == "plain":
                for n in range(1, N + 1):
                    wu, wv = _coarse_from_fine(new_u[n - 1], new_v[n - 1], schedule)
                    new_u[n] = fu[n - 1] + interpolate(wu - cu[n - 1], t)
                    new_v[n] = fv[n - 1] + interpolate(wv - cv[n - 1], t)
            elif variant == "corrected-coarse-only":
                for n in range(1, N + 1):
                    wu, wv = _coarse_from_fine(new_u[n - 1], new_v[n - 1], schedule)
                    qu, qv = theta(wu, wv)
                    new_u[n], new_v[n] = interpolate(qu, t), interpolate(qv, t)
            else:
                tu, tv = theta(cu, cv)
                for n in range(1, N + 1):
                    wu, wv = _coarse_from_fine(new_u[n - 1], new_v[n - 1], schedule)
                    qu, qv = theta(wu, wv)
                    new_u[n] = fu[n - 1] + interpolate(qu - tu[n - 1], t)
                    new_v[n] = fv[n - 1] + interpolate(qv - tv[n - 1], t)
        diverged = not stage_ok or not (np.isfinite(new_u).all() and np.isfinite(new_v).all())
        if diverged:
            log.warning("iteration %d produced non-finite values", k)
        run.iterations.append(_record(k, new_u, new_v, reference, fspeed, scheme, keep_states,
                                      residual=residual, rank=rank, diverged=diverged))
        u, v = _clamp(new_u, new_v, u, v)
    return run


def _clamp(u, v, prev_u, prev_v):
    bad = ~(np.isfinite(u).all(axis=tuple(range(1, u.ndim))) & np.isfinite(v).all(axis=tuple(range(1, v.ndim))))
    if not bad.any():
        return u, v
    u, v = u.copy(), v.copy()
    if prev_u is None:
        # nothing earlier to fall back to: hold the last finite state
        for n in np.flatnonzero(bad):
            u[n], v[n] = u[n - 1], v[n - 1]
    else:
        u[bad], v[bad] = prev_u[bad], prev_v[bad]
    return u, v


def _record(k, u, v, reference, speed, scheme, keep, diverged=False, **kw):
    e, l2 = _errors(u, v, reference[0], reference[1], speed, scheme)
    diverged = bool(diverged or not np.all(e <= DIVERGENCE_LIMIT))
    return Iteration(k, u.copy() if keep else None, v.copy() if keep else None, e, l2,
                     diverged=diverged, **kw)


def plain_parareal(init: WaveState, schedule: CouplingSchedule, K: int, *, scheme="fd2",
                   workers: int | None = None, keep_states: bool = True, reference=None) -> ParaRun:
    """Classical parareal with coarse stage ``I C R``.

    ``scheme`` only selects the gradient used for the energy error metric.
    """
    return _run(init, schedule, K, "plain", scheme, workers=workers,
                keep_states=keep_states, reference=reference)


def theta_parareal(init: WaveState, schedule: CouplingSchedule, K: int, *, scheme="fd2",
                   tol: float = 1e-14, remove_leading: int = 0, workers: int | None = None,
                   keep_states: bool = True, reference=None) -> ParaRun:
    """Parareal with the data-driven phase corrector applied to coarse results.

    Each pass feeds the new fine/coarse snapshot pair into the running SVD
    of the correlation matrix before the serial sweep, so the sweep of
    iteration ``k`` already uses data from iterate ``k - 1``.
    ``remove_leading`` discards that many dominant singular triplets from
    the corrector used in the sweep (the accumulated SVD keeps them).
    """
    return _run(init, schedule, K, "theta", scheme, tol, remove_leading, workers,
                keep_states, reference)


def omega_identity_parareal(init: WaveState, schedule: CouplingSchedule, K: int, *, scheme="fd2",
                            workers: int | None = None, keep_states: bool = True,
                            reference=None) -> ParaRun:
    """Coupling through energy components with no rotation (``Omega = 1``)."""
    return _run(init, schedule, K, "omega-identity", scheme, workers=workers,
                keep_states=keep_states, reference=reference)


def corrected_coarse_only(init: WaveState, schedule: CouplingSchedule, K: int, *, scheme="fd2",
                          tol: float = 1e-14, workers: int | None = None, keep_states: bool = True,
                          reference=None) -> ParaRun:
    """Serial sweeps with the phase-corrected coarse propagator only.

    The fine/coarse pass still runs each iteration to feed the corrector,
    but no fine-minus-coarse correction is added.
    """
    return _run(init, schedule, K, "corrected-coarse-only", scheme, tol, 0, workers,
                keep_states, reference)


def run_variant(variant: str, init: WaveState, schedule: CouplingSchedule, K: int, **kw) -> ParaRun:
    if variant == "plain":
        kw.pop("tol", None)
        kw.pop("remove_leading", None)
        return plain_parareal(init, schedule, K, **kw)
    if variant == "omega-identity":
        kw.pop("tol", None)
        kw.pop("remove_leading", None)
        return omega_identity_parareal(init, schedule, K, **kw)
    if variant == "corrected-coarse-only":
        kw.pop("remove_leading", None)
        return corrected_coarse_only(init, schedule, K, **kw)
    if variant == "theta":
        return theta_parareal(init, schedule, K, **kw)
    raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")


def speedup_estimate(n_cpu: float, m_s: float, m_t: float, d: int, N: int, K: int) -> float:
    """Approximate speedup over serial fine: ``min(n_cpu, m_s^d m_t, m_s^d m_t / N) / K``."""
    if min(n_cpu, m_s, m_t, d, N, K) <= 0:
        raise ValueError("all arguments must be positive")
    work = m_s ** d * m_t
    return min(n_cpu, work, work / N) / K


def wallclock_complexity(K: int, d: int, T: float, dt_fine: float, dt_coarse: float,
                         n_fine: int, n_coarse: int, N: int, n_cpu: int) -> float:
    """Operation count of ``K`` iterations: parallel stages, serial sweep and QR."""
    return K * (d + 1) * (T / (n_cpu * dt_fine) * n_fine + T / (n_cpu * dt_coarse) * n_coarse
                          + T / dt_coarse * n_coarse + n_coarse * N ** 2)


def speedup_full(K: int, n_cpu: int, dt_fine: float, dt_coarse: float, dt_com: float,
                 n_fine: int, n_coarse: int, N: int) -> float:
    """Speedup over serial fine before the ``min`` simplification."""
    ratio = dt_fine * n_coarse / (dt_coarse * n_fine)
    return 1.0 / (K * (1 / n_cpu + (1 / n_cpu + 1) * ratio + n_coarse * N * dt_fine / (n_fine * dt_com)))
