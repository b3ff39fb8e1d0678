import numpy as np
import pytest

from paratime.grid import Grid, SpeedField, WaveState
from paratime.propagator import (
    CFLViolation,
    PropagationDiverged,
    PropagatorConfig,
    laplacian,
    propagate_batch,
    propagate_coupling,
    reverse,
    step,
)


def _cfg(n=64, dt=0.005, steps=10, c=None, dim=1):
    shape = (n,) * dim
    g = Grid(shape, (1.0 / n,) * dim)
    speed = SpeedField.constant(g) if c is None else SpeedField(g, c(g))
    return PropagatorConfig(g, speed, dt, steps)


def verlet_amplification(lam, dt):
    """Oracle: velocity Verlet acting on one mode of ``u'' = -lam u``."""
    a = 1 - 0.5 * dt * dt * lam
    return np.array([[a, dt], [-0.5 * dt * lam * (1 + a), a]])


def test_laplacian_symbol():
    cfg = _cfg()
    x = cfg.grid.axes()[0]
    xi = 2 * np.pi * 5
    h = cfg.grid.spacing[0]
    lam = 4 / h ** 2 * np.sin(xi * h / 2) ** 2
    assert np.allclose(laplacian(np.cos(xi * x), cfg.grid), -lam * np.cos(xi * x), atol=1e-9)


def test_matches_amplification_matrix_oracle():
    cfg = _cfg(steps=37)
    x = cfg.grid.axes()[0]
    h = cfg.grid.spacing[0]
    xi = 2 * np.pi * 7
    lam = 4 / h ** 2 * np.sin(xi * h / 2) ** 2
    A = np.linalg.matrix_power(verlet_amplification(lam, cfg.dt), 37)
    u0, v0 = 0.3, -1.2
    out = propagate_coupling(WaveState(cfg.grid, u0 * np.cos(xi * x), v0 * np.cos(xi * x)), cfg)
    ua, va = A @ [u0, v0]
    assert np.allclose(out.u, ua * np.cos(xi * x), atol=1e-11)
    assert np.allclose(out.udot, va * np.cos(xi * x), atol=1e-9)


def test_time_reversible(rng):
    cfg = _cfg(c=lambda g: 1 + 0.3 * np.sin(2 * np.pi * g.axes()[0]), steps=50)
    s = WaveState(cfg.grid, rng.standard_normal(64), rng.standard_normal(64))
    back = reverse(propagate_coupling(reverse(propagate_coupling(s, cfg)), cfg))
    assert np.allclose(back.u, s.u, atol=1e-10)
    assert np.allclose(back.udot, s.udot, atol=1e-10)


def test_linear_and_batched(rng):
    cfg = _cfg(n=16, dim=2, dt=0.01, c=lambda g: 1 + 0.2 * np.cos(2 * np.pi * g.mesh()[0]))
    u = rng.standard_normal((3, 16, 16))
    v = rng.standard_normal((3, 16, 16))
    bu, bv = propagate_batch(u, v, cfg)
    for i in range(3):
        s = propagate_coupling(WaveState(cfg.grid, u[i], v[i]), cfg)
        assert np.array_equal(s.u, bu[i]) and np.array_equal(s.udot, bv[i])
    comb = propagate_coupling(WaveState(cfg.grid, 2 * u[0] - u[1], 2 * v[0] - v[1]), cfg)
    assert np.allclose(comb.u, 2 * bu[0] - bu[1], atol=1e-10)


def test_step_is_one_step():
    cfg = _cfg(steps=1)
    s = WaveState(cfg.grid, np.sin(2 * np.pi * cfg.grid.axes()[0]), np.zeros(64))
    assert np.array_equal(step(s, cfg).u, propagate_coupling(s, cfg).u)


def test_cfl_and_interval_checks():
    with pytest.raises(CFLViolation):
        _cfg(n=64, dt=0.02)
    with pytest.raises(CFLViolation):
        _cfg(n=16, dim=2, dt=0.05)
    g = Grid((64,), (1 / 64,))
    with pytest.raises(ValueError):
        PropagatorConfig(g, SpeedField.constant(g), 0.005, 10, dt_com=0.06)
    assert PropagatorConfig.for_interval(g, SpeedField.constant(g), 0.05, 10).dt == pytest.approx(0.005)


def test_non_finite_raises():
    cfg = _cfg()
    u = np.zeros(64)
    u[3] = np.inf
    with pytest.raises(PropagationDiverged):
        propagate_coupling(WaveState(cfg.grid, u, np.zeros(64)), cfg)
