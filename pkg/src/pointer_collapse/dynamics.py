"""Pointer-state coordinates and the right-hand sides of the collapse ODEs.

The two-state pointer wave function is parameterised as::

    |psi> = n e^{i xi/2} ( e^{i phi/2} cos(theta/2) |ud>  +  e^{-i phi/2} sin(theta/2) |du> )

and under the non-unitary mean-field evolution the four coordinates obey

    d theta/dt = -(J N eps / hbar) sin(theta) (cos(theta) - (B0/J) cos(chi))
    d phi/dt   = -J N cos(theta) / hbar
    d xi/dt    = 0
    d ln n/dt  = (J N eps / 2 hbar) cos(theta) (cos(theta) - (B0/J) cos(chi))

where ``chi`` is the instantaneous angle between the stochastic symmetry
breaking field and the z axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "BlochState",
    "ModelParams",
    "FixedPointSet",
    "FlowGrid",
    "DegenerateFieldError",
    "theta_dot",
    "phi_dot",
    "xi_dot",
    "log_norm_dot",
    "interior_fixed_point",
    "flow_grid",
    "macroscopic_probability",
    "born_weight",
]


def wrap_phase(angle: float) -> float:
    """Wrap an angle to ``[-pi, pi)``."""
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class BlochState:
    """Pointer state in (theta, phi, xi, ln n) coordinates."""

    theta: float
    phi: float = 0.0
    xi: float = 0.0
    log_norm: float = 0.0

    def __post_init__(self):
        for name in ("theta", "phi", "xi", "log_norm"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"BlochState.{name} must be finite")
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta={self.theta!r} outside [0, pi]")

    @property
    def norm(self) -> float:
        return math.exp(self.log_norm)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.theta, self.phi, self.xi, self.log_norm)


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the collapse model.

    The defaults give ``collapse_rate == 1`` so that time is measured in
    units of the collapse time ``hbar / (J N eps)``.
    """

    j_coupling: float = 1.0
    b0: float = 1.0
    n_spins: int = 100
    epsilon: float = 0.01
    hbar: float = 1.0

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ValueError("; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        for name in ("j_coupling", "b0", "epsilon", "hbar"):
            if not math.isfinite(getattr(self, name)):
                out.append(f"{name} must be finite")
        if not self.j_coupling > 0:
            out.append("j_coupling must be > 0")
        if not self.b0 >= 0:
            out.append("b0 must be >= 0")
        if not self.epsilon >= 0:
            out.append("epsilon must be >= 0")
        if not self.hbar > 0:
            out.append("hbar must be > 0")
        if int(self.n_spins) != self.n_spins or self.n_spins < 2 or self.n_spins % 2:
            out.append("n_spins must be an even integer >= 2")
        return out

    @property
    def collapse_rate(self) -> float:
        """J N eps / hbar, the rate setting the collapse time scale."""
        return self.j_coupling * self.n_spins * self.epsilon / self.hbar

    @property
    def field_ratio(self) -> float:
        """b = B0 / J."""
        return self.b0 / self.j_coupling

    @property
    def precession_rate(self) -> float:
        """J N / hbar, the unitary rotation rate of the relative phase."""
        return self.j_coupling * self.n_spins / self.hbar

    def replace(self, **changes) -> "ModelParams":
        from dataclasses import replace

        return replace(self, **changes)


class FixedPointSet(NamedTuple):
    poles: tuple[float, float]
    interior: float | None

    @property
    def interior_exists(self) -> bool:
        return self.interior is not None


class FlowGrid(NamedTuple):
    """theta-dot sampled on a (chi, theta) grid; ``rate[i, j]`` is at ``chi[i], theta[j]``."""

    theta: np.ndarray
    chi: np.ndarray
    rate: np.ndarray

    def rows(self):
        for i, c in enumerate(self.chi):
            for j, t in enumerate(self.theta):
                yield float(t), float(c), float(self.rate[i, j])


class DegenerateFieldError(ValueError):
    """Raised when B0 = 0: the outcome is deterministic, not stochastic.

    ``probability`` carries the deterministic step-function answer.
    """

    def __init__(self, theta0: float, probability: float):
        super().__init__(
            f"b0 = 0: no stochastic drive, outcome is deterministic "
            f"(P = {probability} at theta0 = {theta0})"
        )
        self.theta0 = theta0
        self.probability = probability


def pole_sin(theta: float) -> float:
    """sin(theta) with the poles mapped to an exact zero."""
    if theta == 0.0 or theta == math.pi:
        return 0.0
    return math.sin(theta)


def _drive(theta: float, params: ModelParams, chi: float) -> float:
    return math.cos(theta) - params.field_ratio * math.cos(chi)


def theta_dot(state: BlochState | float, params: ModelParams, chi: float) -> float:
    theta = state.theta if isinstance(state, BlochState) else state
    return -params.collapse_rate * pole_sin(theta) * _drive(theta, params, chi)


def phi_dot(state: BlochState | float, params: ModelParams) -> float:
    theta = state.theta if isinstance(state, BlochState) else state
    return -params.precession_rate * math.cos(theta)


def xi_dot(*_args) -> float:
    return 0.0


def log_norm_dot(state: BlochState | float, params: ModelParams, chi: float) -> float:
    theta = state.theta if isinstance(state, BlochState) else state
    return 0.5 * params.collapse_rate * math.cos(theta) * _drive(theta, params, chi)


def interior_fixed_point(params: ModelParams, chi: float) -> FixedPointSet:
    """Fixed points of the theta flow for a frozen field angle ``chi``.

    The poles are always fixed; an interior (unstable) fixed point at
    ``arccos(b cos chi)`` exists when ``|b cos chi| <= 1``.
    """
    c = params.field_ratio * math.cos(chi)
    interior = math.acos(c) if abs(c) <= 1.0 else None
    return FixedPointSet(poles=(0.0, math.pi), interior=interior)


def flow_grid(params: ModelParams, theta_count: int, chi_values: Sequence[float]) -> FlowGrid:
    if theta_count < 2:
        raise ValueError("theta_count must be >= 2")
    theta = np.linspace(0.0, math.pi, theta_count)
    chi = np.asarray(chi_values, dtype=float)
    if chi.ndim != 1 or np.any((chi < 0) | (chi > math.pi)):
        raise ValueError("chi_values must lie in [0, pi]")
    b = params.field_ratio
    sin_t = np.sin(theta)
    # the endpoints are exact fixed points; np.sin(pi) is 1.2e-16, not 0
    sin_t[0] = sin_t[-1] = 0.0
    rate = -params.collapse_rate * sin_t[None, :] * (np.cos(theta)[None, :] - b * np.cos(chi)[:, None])
    return FlowGrid(theta=theta, chi=chi, rate=rate + 0.0)  # + 0.0 turns -0.0 into 0.0


def macroscopic_probability(theta0: float, params: ModelParams) -> float:
    """Probability of ending in |ud> when chi is frozen during the collapse.

    Integrating the stationary density sin(chi)/2 over the field angles that
    drive theta towards zero gives ``(1 + (J/B0) cos theta0) / 2``, clamped to
    [0, 1] where the lower integration limit leaves the arccos domain.
    """
    if not 0.0 <= theta0 <= math.pi:
        raise ValueError("theta0 must lie in [0, pi]")
    c0 = math.cos(theta0)
    if params.b0 == 0:
        step = 1.0 if c0 > 0 else (0.0 if c0 < 0 else 0.5)
        raise DegenerateFieldError(theta0, step)
    p = 0.5 * (1.0 + c0 / params.field_ratio)
    return min(1.0, max(0.0, p))


def born_weight(theta0: float) -> float:
    """Born weight cos^2(theta0/2) of |ud>."""
    return math.cos(0.5 * theta0) ** 2
