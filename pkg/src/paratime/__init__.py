"""Parallel-in-time wave propagation with Procrustes phase correction."""
from .energy import (
    EnergyComponents,
    GradientScheme,
    energy,
    energy_error,
    from_components,
    gradient,
    l2_error,
    to_components,
)
from .grid import Grid, GridTransfer, SpeedField, WaveState, interpolate, resize_speed, restrict
from .parareal import (
    CouplingSchedule,
    ParaRun,
    corrected_coarse_only,
    omega_identity_parareal,
    plain_parareal,
    serial_fine,
    speedup_estimate,
    theta_parareal,
)
from .procrustes import PhaseCorrector, apply_corrector, assemble_snapshots, procrustes_solve, update_svd
from .propagator import PropagatorConfig, laplacian, propagate_coupling, step

__version__ = "0.1.0"
