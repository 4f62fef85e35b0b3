"""Trajectory ensembles, Born-rule statistics and calibration of the field strength.

Stream derivation: trajectory ``j`` of grid point ``i`` draws from the Philox
stream keyed by ``(noise.seed, (i << 32) | j)``.  Results therefore do not
depend on how trajectories are split across threads, and two ensembles that
share a seed use common random numbers (convenient for comparing parameter
values).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .dynamics import ModelParams
from .integrate import IntegrationError, IntegratorConfig
from .kernels import get_backend
from .noise import NoiseConfig, NoiseMode

__all__ = [
    "EnsembleStats",
    "CalibrationResult",
    "CalibrationRangeError",
    "run_ensemble",
    "born_deviation",
    "wilson_interval",
    "calibrate_b0",
    "symmetric_grid",
]

Z95 = 1.959963984540054
STREAM_SHIFT = 32
CHUNK = 2048


def symmetric_grid(points: int = 11) -> np.ndarray:
    """``points`` initial angles pi k/(points+1), k = 1..points (excludes the poles)."""
    return math.pi * np.arange(1, points + 1) / (points + 1)


def wilson_interval(successes, trials, z: float = Z95):
    """Wilson score interval; works elementwise on arrays."""
    k = np.asarray(successes, dtype=float)
    n = np.asarray(trials, dtype=float)
    p = k / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = np.where(k == 0, 0.0, np.clip(centre - half, 0.0, 1.0))
    hi = np.where(k == n, 1.0, np.clip(centre + half, 0.0, 1.0))
    return lo, hi


@dataclass
class EnsembleStats:
    """Outcome counts per initial angle.

    ``up_down`` counts trajectories ending in |ud>, with unresolved ones
    assigned by hemisphere; ``unresolved`` and ``unresolved_up`` record how
    many of the counts came from that tie rule.
    """

    theta0: np.ndarray
    trials: np.ndarray
    up_down: np.ndarray
    unresolved: np.ndarray
    unresolved_up: np.ndarray
    mean_steps: np.ndarray = field(default=None)

    def __post_init__(self):
        self.theta0 = np.asarray(self.theta0, dtype=float)
        for name in ("trials", "up_down", "unresolved", "unresolved_up"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        if np.any(self.up_down > self.trials) or np.any(self.unresolved > self.trials):
            raise ValueError("counts exceed trials")

    def __len__(self):
        return self.theta0.size

    @property
    def p_hat(self) -> np.ndarray:
        return self.up_down / self.trials

    @property
    def ci(self):
        return wilson_interval(self.up_down, self.trials)

    @property
    def born_target(self) -> np.ndarray:
        return np.cos(0.5 * self.theta0) ** 2

    @property
    def deviation(self) -> np.ndarray:
        return self.p_hat - self.born_target

    @property
    def unresolved_frac(self) -> np.ndarray:
        return self.unresolved / self.trials

    @property
    def sigma(self) -> np.ndarray:
        """Binomial standard error of ``p_hat``."""
        p = self.p_hat
        return np.sqrt(np.maximum(p * (1 - p), 0.25 / self.trials) / self.trials)

    def merge(self, other: "EnsembleStats") -> "EnsembleStats":
        if not np.array_equal(self.theta0, other.theta0):
            raise ValueError("cannot merge ensembles over different grids")
        steps = None
        if self.mean_steps is not None and other.mean_steps is not None:
            n = self.trials + other.trials
            steps = (self.mean_steps * self.trials + other.mean_steps * other.trials) / n
        return EnsembleStats(
            self.theta0,
            self.trials + other.trials,
            self.up_down + other.up_down,
            self.unresolved + other.unresolved,
            self.unresolved_up + other.unresolved_up,
            steps,
        )

    CSV_COLUMNS = ("theta0", "weight", "trials", "p_hat", "ci_lo", "ci_hi", "born_target", "unresolved_frac")

    def rows(self):
        lo, hi = self.ci
        weight = np.sin(0.5 * self.theta0) ** 2
        for k in range(len(self)):
            yield (
                float(self.theta0[k]),
                float(weight[k]),
                int(self.trials[k]),
                float(self.p_hat[k]),
                float(lo[k]),
                float(hi[k]),
                float(self.born_target[k]),
                float(self.unresolved_frac[k]),
            )


def _stream_ids(n_points: int, trials: int) -> np.ndarray:
    i = np.repeat(np.arange(n_points, dtype=np.uint64), trials)
    j = np.tile(np.arange(trials, dtype=np.uint64), n_points)
    return (i << np.uint64(STREAM_SHIFT)) | j


def run_ensemble(
    theta0_grid: Sequence[float],
    trials: int,
    params: ModelParams,
    noise: NoiseConfig,
    integ: IntegratorConfig | None = None,
    threads: int = 1,
    backend: str | None = None,
) -> EnsembleStats:
    integ = integ or IntegratorConfig()
    grid = np.asarray(theta0_grid, dtype=float)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if trials >= 1 << STREAM_SHIFT:
        raise ValueError("trials must be < 2**32")
    if grid.ndim != 1 or grid.size == 0 or np.any((grid < 0) | (grid > math.pi)):
        raise ValueError("theta0 grid must be a nonempty list of angles in [0, pi]")
    kern = get_backend(backend)
    theta0 = np.repeat(grid, trials)
    streams = _stream_ids(grid.size, trials)
    substeps = integ.substeps_for(params)
    args = (
        noise.seed, params.collapse_rate, params.field_ratio, noise.mode.code, noise.tau_r,
        integ.dt, substeps, integ.max_steps, integ.delta_theta,
    )

    def work(lo_hi):
        lo, hi = lo_hi
        return kern.simulate_outcomes(theta0[lo:hi], streams[lo:hi], *args)

    bounds = [(lo, min(lo + CHUNK, theta0.size)) for lo in range(0, theta0.size, CHUNK)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    outcome = np.concatenate([p[0] for p in parts])
    steps = np.concatenate([p[1] for p in parts])
    final = np.concatenate([p[2] for p in parts])

    bad = np.flatnonzero(steps < 0)
    if bad.size:
        k = int(bad[0])
        raise IntegrationError(int(-steps[k]) - 1, trajectory=k)

    unresolved = outcome == 0
    up = (outcome == 1) | (unresolved & (final < math.pi / 2))
    shape = (grid.size, trials)
    return EnsembleStats(
        theta0=grid,
        trials=np.full(grid.size, trials),
        up_down=up.reshape(shape).sum(axis=1),
        unresolved=unresolved.reshape(shape).sum(axis=1),
        unresolved_up=(unresolved & up).reshape(shape).sum(axis=1),
        mean_steps=steps.reshape(shape).mean(axis=1),
    )


def born_deviation(stats: EnsembleStats, metric: str = "max_abs") -> float:
    """Aggregate of ``p_hat - cos^2(theta0/2)`` over the grid.

    ``folded_mean`` flips the sign on the theta0 > pi/2 half, so it measures
    step-like (positive) versus flattened (negative) statistics; the plain
    ``signed_mean`` cancels between the two halves of a symmetric grid.
    """
    if len(stats) == 0:
        raise ValueError("empty ensemble")
    d = stats.deviation
    if metric == "max_abs":
        return float(np.max(np.abs(d)))
    if metric == "l2":
        return float(np.sqrt(np.sum(d * d)))
    if metric == "signed_mean":
        return float(np.mean(d))
    if metric == "folded_mean":
        return float(np.mean(np.sign(np.cos(stats.theta0)) * d))
    raise ValueError(f"unknown metric {metric!r}")


class CalibrationRangeError(ValueError):
    """The Born deviation has the same sign at both ends of the B0 bracket."""


@dataclass
class CalibrationResult:
    b0_star: float
    deviation: float
    relation_ratio: float
    bracket: tuple[float, float]
    evaluations: list[tuple[float, float]] = field(default_factory=list)
    params: ModelParams | None = None
    tau_r: float | None = None

    @property
    def tau_c(self) -> float:
        p = self.params
        return p.hbar / (2.0 * p.j_coupling * p.n_spins)


def calibrate_b0(
    params: ModelParams,
    noise: NoiseConfig,
    integ: IntegratorConfig,
    trials: int,
    theta0_grid: Sequence[float] | None = None,
    bracket: tuple[float, float] | None = None,
    rel_tol: float = 0.01,
    max_iter: int = 30,
    threads: int = 1,
    backend: str | None = None,
    require_mesoscopic: bool = True,
) -> CalibrationResult:
    """Find the field strength B0 at which the ensemble reproduces Born's rule.

    Bisects (in log B0) on the folded signed-mean deviation, which is positive
    for step-like statistics (B0 too small) and negative for flattened ones
    (B0 too large).  Every evaluation reuses the same seed, so the objective
    is a deterministic function of B0.  ``params.b0`` is ignored.
    """
    if noise.mode is not NoiseMode.POISSON_RESAMPLE:
        raise ValueError("calibration needs poisson_resample noise")
    tau_c = params.hbar / (2.0 * params.j_coupling * params.n_spins)
    if require_mesoscopic and noise.tau_r > tau_c * (1 + 1e-12):
        raise ValueError(f"tau_r = {noise.tau_r} exceeds tau_c = {tau_c}: not the mesoscopic regime")
    grid = symmetric_grid() if theta0_grid is None else np.asarray(theta0_grid, dtype=float)
    if bracket is None:
        guess = math.sqrt(params.j_coupling * params.hbar / (2.0 * params.n_spins * noise.tau_r))
        bracket = (guess / 8.0, guess * 8.0)
    lo, hi = map(float, bracket)
    if not 0 < lo < hi:
        raise ValueError("bracket must satisfy 0 < lo < hi")

    evaluations: list[tuple[float, float]] = []

    def objective(b0):
        stats = run_ensemble(grid, trials, params.replace(b0=b0), noise, integ, threads, backend)
        g = born_deviation(stats, "folded_mean")
        evaluations.append((b0, g))
        return g

    g_lo, g_hi = objective(lo), objective(hi)
    if not (g_lo > 0 > g_hi):
        raise CalibrationRangeError(
            f"Born deviation does not change sign on [{lo}, {hi}]: {g_lo:+.4f}, {g_hi:+.4f}"
        )
    for _ in range(max_iter):
        if hi / lo <= 1.0 + rel_tol:
            break
        mid = math.sqrt(lo * hi)
        g = objective(mid)
        if g > 0:
            lo = mid
        elif g < 0:
            hi = mid
        else:
            lo = hi = mid
            break
    b0_star, dev = min(evaluations, key=lambda e: abs(e[1]))
    ratio = params.j_coupling / (2.0 * b0_star**2 * params.n_spins * noise.tau_r) * params.hbar
    return CalibrationResult(
        b0_star=b0_star,
        deviation=dev,
        relation_ratio=ratio,
        bracket=(float(bracket[0]), float(bracket[1])),
        evaluations=evaluations,
        params=replace(params, b0=b0_star),
        tau_r=noise.tau_r,
    )
