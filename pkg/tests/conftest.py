import numpy as np
import pytest

from paratime.grid import Grid, SpeedField, WaveState
from paratime.parareal import CouplingSchedule

# Lines printed by the acceptance module, echoed once at the end of the session.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pulse_state(grid: Grid, k=10 * np.pi, width=100.0) -> WaveState:
    x = grid.mesh()[-1]
    return WaveState(grid, np.cos(k * x) * np.exp(-width * x ** 2), np.zeros(grid.shape))


def small_schedule(n=40, ratio=1, N=8, dt_com=0.05, coarse_steps=5, fine_steps=40, speed=None,
                   interp="fourier"):
    coarse = Grid((n,), (1.0 / n,), (-0.5,))
    fine = coarse.refine(ratio)
    c = SpeedField.constant(fine) if speed is None else SpeedField(fine, speed(fine.mesh()[0]))
    return CouplingSchedule.build(coarse, c, T=N * dt_com, dt_com=dt_com,
                                  coarse_steps=coarse_steps, fine_steps=fine_steps, interp_kind=interp)
