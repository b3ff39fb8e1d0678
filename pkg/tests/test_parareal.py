import dataclasses

import numpy as np
import pytest

from conftest import pulse_state, small_schedule
from paratime.grid import Grid, SpeedField, WaveState
from paratime.parareal import (
    CouplingSchedule,
    corrected_coarse_only,
    plain_parareal,
    run_variant,
    serial_fine,
    speedup_estimate,
    speedup_full,
    theta_parareal,
)


@pytest.fixture(scope="module")
def setup():
    s = small_schedule(n=40, ratio=2, N=6)
    init = pulse_state(s.fine.grid, k=4 * np.pi, width=60.0)
    return s, init


@pytest.mark.parametrize("variant", ["plain", "theta", "omega-identity"])
def test_iterate_k_exact_up_to_k_minus_1(setup, variant):
    s, init = setup
    run = run_variant(variant, init, s, s.N + 1)
    for it in run.iterations:
        assert np.all(it.energy_errors[:it.k] <= 1e-10), (it.k, it.energy_errors)
    assert run.iterations[-1].energy_errors.max() <= 1e-10


def test_first_iterate_is_serial_coarse(setup):
    s, init = setup
    run = plain_parareal(init, s, 1)
    assert len(run.iterations) == 1 and run.iterations[0].residual is None
    assert run.iterations[0].energy_errors[0] == 0.0
    assert run.iterations[0].energy_errors[-1] > 1e-3


def test_reference_is_serial_fine(setup):
    s, init = setup
    ref = serial_fine(init, s)
    run = plain_parareal(init, s, 1)
    assert np.array_equal(run.reference_u[-1], ref[-1].u)


def test_identical_propagators_converge_in_one_correction():
    s = small_schedule(n=32, ratio=1, N=5, coarse_steps=10, fine_steps=10)
    init = pulse_state(s.fine.grid, k=2 * np.pi, width=30.0)
    run = plain_parareal(init, s, 2)
    assert run.iterations[1].energy_errors.max() < 1e-12


def test_theta_records_residual_and_rank(setup):
    s, init = setup
    run = theta_parareal(init, s, 3, scheme="fd4", keep_states=False)
    res = run.residuals()
    assert [r[0] for r in res] == [2, 3]
    assert all(0 <= r[1] < 1 and r[2] >= 1 for r in res)
    assert run.iterations[1].u is None
    assert not run.diverged


def test_remove_zero_is_plain_theta(setup):
    s, init = setup
    a = theta_parareal(init, s, 3)
    b = theta_parareal(init, s, 3, remove_leading=0)
    assert np.array_equal(a.final_energy_errors(), b.final_energy_errors())


def test_remove_more_than_rank_empties_corrector(setup):
    s, init = setup
    run = theta_parareal(init, s, 3, remove_leading=10 ** 6)
    assert all(r[2] == 0 for r in run.residuals())
    assert all(r[1] == pytest.approx(1.0) for r in run.residuals())


def test_workers_do_not_change_results(setup):
    s, init = setup
    a = theta_parareal(init, s, 3, workers=1)
    b = theta_parareal(init, s, 3, workers=3)
    assert np.array_equal(a.iterations[-1].u, b.iterations[-1].u)


def test_corrected_coarse_only_ignores_fine_correction(setup):
    s, init = setup
    run = corrected_coarse_only(init, s, 3)
    assert len(run.iterations) == 3 and run.residuals()[0][2] >= 1


def test_divergence_is_flagged_not_raised(setup):
    s, init = setup
    # an unstable fine stage, bypassing the CFL check on purpose
    fine = s.fine
    bad = dataclasses.replace(fine)
    object.__setattr__(bad, "dt", fine.dt * 40)
    broken = dataclasses.replace(s)
    object.__setattr__(broken, "fine", bad)
    run = theta_parareal(init, broken, 3, reference=(np.zeros((s.N + 1,) + init.grid.shape) + 1,
                                                     np.zeros((s.N + 1,) + init.grid.shape)))
    assert run.diverged
    assert len(run.iterations) == 3


def test_schedule_validation():
    g = Grid((16,), (1 / 16,))
    c = SpeedField.constant(g)
    with pytest.raises(ValueError):
        CouplingSchedule.build(g, c, T=1.0, dt_com=0.3, coarse_steps=10, fine_steps=20)
    with pytest.raises(ValueError):
        run_variant("nope", WaveState.zeros(g), small_schedule(n=16, N=2), 2)


def test_speedup_estimate():
    assert speedup_estimate(100, 2, 10, 1, 10, 5) == pytest.approx(2 * 10 / 10 / 5)
    assert speedup_estimate(4, 10, 10, 2, 1, 2) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        speedup_estimate(0, 1, 1, 1, 1, 1)
    assert 0 < speedup_full(5, 20, 1e-4, 1e-3, 0.05, 10000, 100, 100) < 20
