"""Pointer-state objective collapse simulator.

Reduced Bloch-sphere dynamics of a two-sublattice pointer under a weak
non-unitary, randomly oriented symmetry-breaking field, with trajectory
ensembles for outcome statistics.
"""
__version__ = "0.1.0"

from .bounds import StabilityBound, escape_fraction, escape_probability, stability_min_tau
from .dynamics import (
    BlochState,
    DegenerateFieldError,
    ModelParams,
    born_weight,
    flow_grid,
    interior_fixed_point,
    log_norm_dot,
    macroscopic_probability,
    phi_dot,
    theta_dot,
    xi_dot,
)
from .ensemble import (
    CalibrationRangeError,
    CalibrationResult,
    EnsembleStats,
    born_deviation,
    calibrate_b0,
    run_ensemble,
    symmetric_grid,
)
from .integrate import IntegrationError, IntegratorConfig, Outcome, TrajectoryRecord, integrate_trajectory, step_rk4
from .noise import NoiseConfig, NoiseMode, NoisePath, make_noise_path
from .oracle import AmplitudeState, amplitudes_from_bloch, extract_bloch, integrate_amplitudes

__all__ = [name for name in dir() if not name.startswith("_")]
