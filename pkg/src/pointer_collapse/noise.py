"""Stochastic field direction chi(t).

The field direction is isotropic, so ``cos chi`` is uniform on [-1, 1] and
``chi`` has density sin(chi)/2 on [0, pi].  Three temporal structures are
provided:

``frozen``
    one draw per trajectory.
``per_step``
    a fresh draw at every integration step.
``poisson_resample``
    a jump process: between steps the value is redrawn with probability
    ``1 - exp(-dt/tau_r)``.  The autocorrelation of ``cos chi`` is then
    exactly ``exp(-lag/tau_r)`` on the step grid, with the uniform marginal
    preserved.

Every trajectory owns a counter-based Philox stream keyed by
``(seed, stream_id)``, so a realisation depends on nothing but those two
integers.  The compiled kernels consume the stream in exactly the same order
as :class:`NoiseProcess`:

1. initial value ``u`` (``cos chi = 2u - 1``);
2. in ``poisson_resample`` mode, a waiting time ``e`` giving the number of
   steps until the next redraw, ``1 + floor(-log1p(-e) * tau_r / dt)``;
3. at every redraw, a new value and (``poisson_resample`` only) a new
   waiting time.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.random import Generator, Philox

__all__ = [
    "NoiseMode",
    "NoiseConfig",
    "NoisePath",
    "NoiseProcess",
    "make_rng",
    "sample_stationary_chi",
    "chi_from_uniform",
    "make_noise_path",
]

U64 = (1 << 64) - 1
# cap on a waiting time in steps; far beyond any max_steps
MAX_GAP = 1 << 62


class NoiseMode(str, enum.Enum):
    FROZEN = "frozen"
    PER_STEP = "per_step"
    POISSON_RESAMPLE = "poisson_resample"

    @property
    def code(self) -> int:
        return _MODE_CODES[self]


_MODE_CODES = {NoiseMode.FROZEN: 0, NoiseMode.PER_STEP: 1, NoiseMode.POISSON_RESAMPLE: 2}


@dataclass(frozen=True)
class NoiseConfig:
    mode: NoiseMode = NoiseMode.PER_STEP
    tau_r: float = 0.0
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", NoiseMode(self.mode))
        problems = self.violations()
        if problems:
            raise ValueError("; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        if self.mode is NoiseMode.POISSON_RESAMPLE and not (self.tau_r > 0 and math.isfinite(self.tau_r)):
            out.append("tau_r must be > 0 for poisson_resample noise")
        if self.tau_r < 0:
            out.append("tau_r must be >= 0")
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if int(v) != v or not 0 <= v <= U64:
                out.append(f"{name} must be an unsigned 64-bit integer")
        return out

    def with_stream(self, stream_id: int) -> "NoiseConfig":
        return NoiseConfig(self.mode, self.tau_r, self.seed, stream_id)


def make_rng(seed: int, stream_id: int) -> Generator:
    """Philox generator for one trajectory, keyed by ``(seed, stream_id)``."""
    return Generator(Philox(key=np.array([seed, stream_id], dtype=np.uint64)))


def chi_from_uniform(u: float) -> float:
    """Map ``u`` uniform on [-1, 1] to chi = arccos(u), which has density sin(chi)/2."""
    if not -1.0 <= u <= 1.0:
        raise ValueError("u must lie in [-1, 1]")
    return math.acos(u)


def sample_stationary_chi(rng: Generator) -> float:
    """Draw chi with density sin(chi)/2 on [0, pi]."""
    return chi_from_uniform(2.0 * rng.random() - 1.0)


def waiting_steps(e: float, tau_r: float, dt: float) -> int:
    """Steps until the next redraw, given a uniform draw ``e`` in [0, 1)."""
    gap = -math.log1p(-e) * tau_r / dt
    if gap >= MAX_GAP:
        return MAX_GAP
    return 1 + int(gap)


class NoiseProcess:
    """Streaming realisation of chi on a fixed step grid.

    ``cos_chi`` is the value in force during the current step; call
    :meth:`advance` to move to the next step.
    """

    def __init__(self, config: NoiseConfig, dt: float):
        if not dt > 0:
            raise ValueError("dt must be > 0")
        self.config = config
        self.dt = dt
        self.rng = make_rng(config.seed, config.stream_id)
        self.cos_chi = 2.0 * self.rng.random() - 1.0
        self.jumped = False
        self._remaining = self._next_gap()

    def _next_gap(self) -> int:
        mode = self.config.mode
        if mode is NoiseMode.POISSON_RESAMPLE:
            return waiting_steps(self.rng.random(), self.config.tau_r, self.dt)
        if mode is NoiseMode.PER_STEP:
            return 1
        return -1

    @property
    def chi(self) -> float:
        return math.acos(self.cos_chi)

    def advance(self) -> float:
        """Move one step forward and return the new chi."""
        self.jumped = False
        if self._remaining > 0:
            self._remaining -= 1
            if self._remaining == 0:
                self.cos_chi = 2.0 * self.rng.random() - 1.0
                self._remaining = self._next_gap()
                self.jumped = True
        return self.chi

    def next_jump(self) -> int:
        """Advance to the next redraw and return the number of steps taken.

        Returns -1 (and does nothing) for frozen noise.
        """
        gap = self._remaining
        if gap < 0:
            return -1
        self._remaining = 1
        self.advance()
        return gap


@dataclass
class NoisePath:
    """Piecewise-constant, right-continuous chi(t).

    ``values[i]`` holds on ``[times[i], times[i+1])``; the last value holds up
    to ``horizon``.
    """

    times: np.ndarray
    values: np.ndarray
    horizon: float
    cos_values: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.cos_values is None:
            self.cos_values = np.cos(self.values)
        else:
            self.cos_values = np.asarray(self.cos_values, dtype=float)
        if self.times.shape != self.values.shape or self.times.size == 0:
            raise ValueError("times and values must be nonempty and equally long")
        if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0):
            raise ValueError("times must start at 0 and increase strictly")
        if np.any((self.values < 0) | (self.values > math.pi)):
            raise ValueError("chi values must lie in [0, pi]")

    def __len__(self):
        return self.times.size

    def index_at(self, t: float) -> int:
        return int(np.searchsorted(self.times, t, side="right")) - 1

    def chi_at(self, t: float) -> float:
        return float(self.values[self.index_at(t)])

    def cos_on_steps(self, dt: float, n_steps: int) -> np.ndarray:
        """``cos chi`` in force during each of ``n_steps`` steps of size ``dt``.

        Jump instants are taken to be multiples of ``dt``; the step index is
        recovered with rounding so that ``k * dt`` round-off does not shift it.
        """
        starts = np.rint(self.times / dt).astype(np.int64)
        idx = np.searchsorted(starts, np.arange(n_steps), side="right") - 1
        return self.cos_values[idx]

    def to_csv(self, path: str | Path) -> None:
        from .io import atomic_write_text, fmt

        lines = ["t_start,chi"]
        lines += [f"{fmt(t)},{fmt(v)}" for t, v in zip(self.times, self.values)]
        atomic_write_text(path, "\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path: str | Path, horizon: float | None = None) -> "NoisePath":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        times = [float(r["t_start"]) for r in rows]
        values = [float(r["chi"]) for r in rows]
        return cls(times, values, horizon if horizon is not None else times[-1])


def make_noise_path(horizon: float, config: NoiseConfig, dt: float = 1e-3) -> NoisePath:
    """Materialise the realisation seen by an integrator with step ``dt``.

    Identical to what :class:`NoiseProcess` yields step by step, so the
    Bloch integrator and the amplitude oracle can share one realisation.
    """
    if not horizon > 0:
        raise ValueError("horizon must be > 0")
    proc = NoiseProcess(config, dt)
    n_steps = int(math.ceil(horizon / dt - 1e-9))
    times, cos_values = [0.0], [proc.cos_chi]
    k = 0
    while True:
        gap = proc.next_jump()
        if gap < 0:
            break
        k += gap
        if k >= n_steps:
            break
        times.append(k * dt)
        cos_values.append(proc.cos_chi)
    cos_arr = np.array(cos_values)
    return NoisePath(np.array(times), np.arccos(cos_arr), horizon, cos_values=cos_arr)
