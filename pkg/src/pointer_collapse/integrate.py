"""Fixed-step RK4 integration of the pointer-state ODEs.

The field angle is held constant within a step and resampled between steps.
A step may be split into ``substeps`` RK4 sub-steps sharing the same field
value; the noise process, ``max_steps`` and ``steps_used`` all count whole
steps.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import BlochState, ModelParams, wrap_phase
from .noise import NoiseConfig, NoisePath, NoiseProcess

__all__ = [
    "IntegratorConfig",
    "Outcome",
    "TrajectoryRecord",
    "IntegrationError",
    "step_rk4",
    "integrate_trajectory",
    "integrate_path",
]

PI = math.pi


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    max_steps: int = 8000
    delta_theta: float = 1e-3
    record_stride: int = 0
    # RK4 sub-steps per noise step; 0 picks enough to resolve the fastest rate
    substeps: int = 1

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ValueError("; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        if not (self.dt > 0 and math.isfinite(self.dt)):
            out.append("dt must be > 0")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            out.append("max_steps must be an integer >= 1")
        if not 0 < self.delta_theta < PI / 2:
            out.append("delta_theta must lie in (0, pi/2)")
        if int(self.record_stride) != self.record_stride or self.record_stride < 0:
            out.append("record_stride must be an integer >= 0")
        if int(self.substeps) != self.substeps or self.substeps < 0:
            out.append("substeps must be an integer >= 0 (0 = automatic)")
        return out

    def substeps_for(self, params: ModelParams, h_rate: float = 0.1) -> int:
        """Sub-steps actually used: ``substeps``, or if 0 enough for rate*(1+b)*h <= h_rate."""
        if self.substeps:
            return int(self.substeps)
        stiff = params.collapse_rate * (1.0 + params.field_ratio) * self.dt
        return max(1, math.ceil(stiff / h_rate))


class Outcome(enum.IntEnum):
    UNRESOLVED = 0
    UP_DOWN = 1
    DOWN_UP = 2


class IntegrationError(ArithmeticError):
    """Non-finite state; usually means ``dt`` is too large for the rates involved."""

    def __init__(self, step: int, message: str = "non-finite state", trajectory: int | None = None):
        where = f"step {step}" if trajectory is None else f"trajectory {trajectory}, step {step}"
        super().__init__(f"{message} at {where}")
        self.step = step
        self.trajectory = trajectory


PATH_COLUMNS = ("t", "theta", "phi", "xi", "log_norm", "chi")


@dataclass
class TrajectoryRecord:
    theta0: float
    phi0: float
    outcome: Outcome
    steps_used: int
    final_state: BlochState
    path: dict[str, np.ndarray] | None = field(default=None, repr=False)

    @property
    def resolved(self) -> bool:
        return self.outcome is not Outcome.UNRESOLVED

    @property
    def hemisphere_outcome(self) -> Outcome:
        """Outcome with unresolved runs assigned by hemisphere (theta < pi/2 -> UP_DOWN)."""
        if self.resolved:
            return self.outcome
        return Outcome.UP_DOWN if self.final_state.theta < PI / 2 else Outcome.DOWN_UP

    def to_csv(self, path) -> None:
        from .io import write_csv

        if self.path is None:
            raise ValueError("trajectory was run with record_stride=0; nothing to write")
        cols = [self.path[c] for c in PATH_COLUMNS]
        write_csv(path, PATH_COLUMNS, zip(*cols))


def _rk4_full(theta, phi, xi, log_norm, bc, rate, prec, h):
    try:
        return _rk4_stages(theta, phi, xi, log_norm, bc, rate, prec, h)
    except ValueError:
        # math.sin/cos raise on infinities where C returns nan
        return math.nan, phi, xi, math.nan


def _rk4_stages(theta, phi, xi, log_norm, bc, rate, prec, h):
    # theta arithmetic is kept identical to the ensemble kernels
    s = 0.0 if theta == 0.0 or theta == PI else math.sin(theta)
    c = math.cos(theta)
    k1 = -rate * s * (c - bc)
    p1, n1 = -prec * c, 0.5 * rate * c * (c - bc)

    t = theta + 0.5 * h * k1
    s = 0.0 if t == 0.0 or t == PI else math.sin(t)
    c = math.cos(t)
    k2 = -rate * s * (c - bc)
    p2, n2 = -prec * c, 0.5 * rate * c * (c - bc)

    t = theta + 0.5 * h * k2
    s = 0.0 if t == 0.0 or t == PI else math.sin(t)
    c = math.cos(t)
    k3 = -rate * s * (c - bc)
    p3, n3 = -prec * c, 0.5 * rate * c * (c - bc)

    t = theta + h * k3
    s = 0.0 if t == 0.0 or t == PI else math.sin(t)
    c = math.cos(t)
    k4 = -rate * s * (c - bc)
    p4, n4 = -prec * c, 0.5 * rate * c * (c - bc)

    theta = theta + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if theta < 0.0:
        theta = 0.0
    elif theta > PI:
        theta = PI
    phi = phi + (h / 6.0) * (p1 + 2.0 * p2 + 2.0 * p3 + p4)
    log_norm = log_norm + (h / 6.0) * (n1 + 2.0 * n2 + 2.0 * n3 + n4)
    # d xi/dt = 0 identically
    return theta, phi, xi, log_norm


def step_rk4(state: BlochState, chi: float, params: ModelParams, dt: float) -> BlochState:
    """One classical RK4 step with ``chi`` held fixed; theta clamped to [0, pi]."""
    theta, phi, xi, ln = _rk4_full(
        state.theta, state.phi, state.xi, state.log_norm,
        params.field_ratio * math.cos(chi), params.collapse_rate, params.precession_rate, dt,
    )
    return BlochState(theta, wrap_phase(phi), xi, ln)


def integrate_trajectory(
    theta0: float,
    phi0: float,
    params: ModelParams,
    noise: NoiseConfig,
    integ: IntegratorConfig | None = None,
) -> TrajectoryRecord:
    """Integrate one collapse run until theta enters a pole region or ``max_steps``.

    Pole regions are ``theta <= delta_theta`` (outcome UP_DOWN) and
    ``theta >= pi - delta_theta`` (DOWN_UP).  Starting inside a pole region
    returns immediately with ``steps_used == 0``.
    """
    integ = integ or IntegratorConfig()
    if not 0.0 <= theta0 <= PI:
        raise ValueError("theta0 must lie in [0, pi]")
    rate, prec, b = params.collapse_rate, params.precession_rate, params.field_ratio
    proc = NoiseProcess(noise, integ.dt)
    substeps = integ.substeps_for(params)
    h = integ.dt / substeps
    lo, hi = integ.delta_theta, PI - integ.delta_theta
    theta, phi, xi, ln = float(theta0), float(phi0), 0.0, 0.0
    bc = b * proc.cos_chi
    stride = integ.record_stride
    rows = [] if stride else None

    def record(k):
        rows.append((k * integ.dt, theta, wrap_phase(phi), xi, ln, proc.chi))

    outcome = Outcome.UNRESOLVED
    if theta <= lo:
        outcome = Outcome.UP_DOWN
    elif theta >= hi:
        outcome = Outcome.DOWN_UP
    if rows is not None:
        record(0)
    k = 0
    while outcome is Outcome.UNRESOLVED and k < integ.max_steps:
        for _ in range(substeps):
            theta, phi, xi, ln = _rk4_full(theta, phi, xi, ln, bc, rate, prec, h)
            if theta <= lo:
                outcome = Outcome.UP_DOWN
                break
            if theta >= hi:
                outcome = Outcome.DOWN_UP
                break
        k += 1
        if not (math.isfinite(theta) and math.isfinite(phi) and math.isfinite(ln)):
            raise IntegrationError(k - 1)
        if rows is not None and (k % stride == 0 or outcome is not Outcome.UNRESOLVED or k == integ.max_steps):
            record(k)
        proc.advance()
        bc = b * proc.cos_chi

    path = None
    if rows is not None:
        arr = np.array(rows, dtype=float).reshape(-1, len(PATH_COLUMNS))
        path = {name: arr[:, i] for i, name in enumerate(PATH_COLUMNS)}
    return TrajectoryRecord(
        theta0=float(theta0),
        phi0=float(phi0),
        outcome=outcome,
        steps_used=k,
        final_state=BlochState(theta, wrap_phase(phi), xi, ln),
        path=path,
    )


def integrate_path(
    state: BlochState,
    params: ModelParams,
    path: NoisePath,
    dt: float,
    n_steps: int | None = None,
) -> dict[str, np.ndarray]:
    """Integrate the four Bloch ODEs along a fixed noise realisation without stopping at poles.

    Returns arrays sampled at every step (``n_steps + 1`` points); ``phi`` is
    left unwrapped.
    """
    if n_steps is None:
        n_steps = int(round(path.horizon / dt))
    cos_steps = path.cos_on_steps(dt, n_steps)
    rate, prec, b = params.collapse_rate, params.precession_rate, params.field_ratio
    out = np.empty((n_steps + 1, 4))
    theta, phi, xi, ln = state.as_tuple()
    out[0] = theta, phi, xi, ln
    for k in range(n_steps):
        theta, phi, xi, ln = _rk4_full(theta, phi, xi, ln, b * cos_steps[k], rate, prec, dt)
        out[k + 1] = theta, phi, xi, ln
    if not np.all(np.isfinite(out)):
        bad = int(np.argmax(~np.all(np.isfinite(out), axis=1)))
        raise IntegrationError(bad - 1)
    return {
        "t": dt * np.arange(n_steps + 1),
        "theta": out[:, 0],
        "phi": out[:, 1],
        "xi": out[:, 2],
        "log_norm": out[:, 3],
    }
