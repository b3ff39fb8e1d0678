import numpy as np
import pytest

from paratime.energy import (
    SCHEMES,
    EnergyComponents,
    GradientScheme,
    UndefinedReferenceError,
    component_energy,
    energies,
    energy,
    energy_error,
    from_components,
    gradient,
    l2_error,
    reconstruct_displacement,
    stacked_components,
    to_components,
)
from paratime.grid import Grid, SpeedField, WaveState


def _grid(n=32, dim=1):
    return Grid((n,) * dim, (1.0 / n,) * dim)


@pytest.mark.parametrize("kind", SCHEMES)
def test_gradient_matches_symbol(kind):
    g = _grid(32)
    x = g.axes()[0]
    xi = 2 * np.pi * 6
    sym = GradientScheme(kind).symbol(xi, g.spacing[0])
    assert np.allclose(gradient(np.sin(xi * x), g, kind)[0], sym * np.cos(xi * x), atol=1e-10)


@pytest.mark.parametrize("kind,order", [("fd2", 2), ("fd4", 4), ("fd6", 6), ("fd8", 8)])
def test_fd_order(kind, order):
    errs = []
    for n in (32, 64):
        g = _grid(n)
        x = g.axes()[0]
        d = gradient(np.sin(2 * np.pi * x), g, kind)[0]
        errs.append(np.abs(d - 2 * np.pi * np.cos(2 * np.pi * x)).max())
    assert np.log2(errs[0] / errs[1]) == pytest.approx(order, abs=0.2)


def test_unknown_scheme():
    with pytest.raises(ValueError):
        GradientScheme("fd3")


def test_stacked_round_trip(rng):
    g = _grid(6, 2)
    comp = EnergyComponents(g, rng.standard_normal((2, 6, 6)), rng.standard_normal((6, 6)), 1.5)
    back = EnergyComponents.from_stacked(g, comp.stacked(), comp.mean_u)
    assert np.array_equal(back.grad, comp.grad) and np.array_equal(back.momentum, comp.momentum)
    with pytest.raises(ValueError):
        EnergyComponents.from_stacked(g, comp.stacked()[:-1], 0.0)


@pytest.mark.parametrize("kind", ["fd4", "fd8"])
def test_fd_reconstruction_multiplier(kind):
    # Lambda^+ Lambda scales each Fourier mode by symbol(xi) / xi
    g = _grid(40)
    x = g.axes()[0]
    xi = 2 * np.pi * 9
    u = np.cos(xi * x)
    rec = reconstruct_displacement(gradient(u, g, kind), g, u.sum())
    mult = GradientScheme(kind).symbol(xi, g.spacing[0]) / xi
    assert np.allclose(rec, mult * u, atol=1e-12)


def test_components_round_trip_keeps_mean_and_velocity(rng):
    g = _grid(15, 2)
    c = SpeedField(g, 1 + rng.random(g.shape))
    s = WaveState(g, rng.standard_normal(g.shape) + 3.0, rng.standard_normal(g.shape))
    back = from_components(to_components(s, c, "fd4"), c)
    assert back.u.sum() == pytest.approx(s.u.sum(), rel=1e-12)
    assert np.allclose(back.udot, s.udot, atol=1e-13)


def test_batched_reconstruction_matches_loop(rng):
    g = _grid(9, 2)
    grads = rng.standard_normal((4, 2, 9, 9))
    totals = rng.standard_normal(4)
    batch = reconstruct_displacement(grads, g, totals)
    for i in range(4):
        assert np.allclose(batch[i], reconstruct_displacement(grads[i], g, totals[i]))


def test_energy_definitions_agree(rng):
    g = _grid(12, 2)
    c = SpeedField(g, 1 + rng.random(g.shape))
    u = rng.standard_normal((3,) + g.shape)
    v = rng.standard_normal((3,) + g.shape)
    e = energies(u, v, c, "fd6")
    for i in range(3):
        s = WaveState(g, u[i], v[i])
        assert e[i] == pytest.approx(energy(s, c, "fd6"), rel=1e-13)
        assert e[i] == pytest.approx(component_energy(to_components(s, c, "fd6")), rel=1e-13)
    rows = stacked_components(u, v, c, "fd6")
    assert rows.shape == (3, 3 * g.size)


def test_energy_constant_shift_is_invisible():
    g = _grid(16)
    c = SpeedField.constant(g)
    s = WaveState(g, np.sin(2 * np.pi * g.axes()[0]), np.zeros(16))
    shifted = WaveState(g, s.u + 7.0, s.udot)
    assert energy(shifted, c) == pytest.approx(energy(s, c))


def test_error_metrics():
    g = _grid(16)
    c = SpeedField.constant(g)
    x = g.axes()[0]
    b = WaveState(g, np.sin(2 * np.pi * x), np.cos(2 * np.pi * x))
    assert energy_error(b, b, c) == 0.0
    assert energy_error(b * 1.1, b, c) == pytest.approx(0.1)
    assert l2_error(b * 0.5, b) == pytest.approx(0.5)
    zero = WaveState.zeros(g)
    with pytest.raises(UndefinedReferenceError):
        energy_error(b, zero, c)
    with pytest.raises(UndefinedReferenceError):
        l2_error(b, zero)
