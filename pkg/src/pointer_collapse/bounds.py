"""Lower bound on the noise correlation time from stability of collapsed states.

A collapsed state sits within ``delta_theta ~ exp(-J N eps tau_r / hbar)`` of
a pole.  A fresh field value pushes it out with probability
``sin^2(delta_theta / 2)``, so the state survives a time ``tau_u`` when::

    2 J N eps tau_r / hbar  >=  ln(tau_u / (4 tau_r))

:func:`stability_min_tau` returns the smallest such ``tau_r``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import get_backend
from .noise import NoiseMode

__all__ = [
    "StabilityBound",
    "DegenerateParameterError",
    "stability_residual",
    "stability_min_tau",
    "escape_probability",
    "escape_fraction",
    "AGE_OF_UNIVERSE_S",
]

#: Age of the observable universe in seconds, the default survival time.
AGE_OF_UNIVERSE_S = 4.4e17

RESIDUAL_TOL = 1e-10


class DegenerateParameterError(ValueError):
    """The stability equation has no root in ``(0, tau_u]``."""


@dataclass(frozen=True)
class StabilityBound:
    j_coupling: float
    n_spins: float
    epsilon: float
    tau_u: float
    hbar: float
    tau_r_min: float
    residual: float
    iterations: int

    @property
    def collapse_rate(self) -> float:
        return self.j_coupling * self.n_spins * self.epsilon / self.hbar

    @property
    def delta_theta(self) -> float:
        """Typical distance from the pole after one correlation time, exp(-rate*tau_r)."""
        return math.exp(-self.collapse_rate * self.tau_r_min)


def stability_residual(tau_r: float, rate: float, tau_u: float) -> float:
    """g(tau_r) = 2 rate tau_r - ln(tau_u / (4 tau_r)); strictly increasing in tau_r."""
    return 2.0 * rate * tau_r - math.log(tau_u / (4.0 * tau_r))


def stability_min_tau(
    j_coupling: float,
    n_spins: float,
    epsilon: float,
    tau_u: float = AGE_OF_UNIVERSE_S,
    hbar: float = 1.0,
    max_iter: int = 400,
) -> StabilityBound:
    """Smallest correlation time for which collapse survives a time ``tau_u``.

    Bisection in ``log(tau_r)`` on ``(0, tau_u]``, continued until the bracket
    collapses to adjacent floats; the endpoint with the smaller residual is
    returned.

    Raises
    ------
    DegenerateParameterError
        If an input is not a positive finite number, or the residual does not
        change sign on the bracket.
    """
    values = dict(j_coupling=j_coupling, n_spins=n_spins, epsilon=epsilon, tau_u=tau_u, hbar=hbar)
    bad = [k for k, v in values.items() if not (math.isfinite(v) and v > 0)]
    if bad:
        raise DegenerateParameterError("must be positive and finite: " + ", ".join(bad))
    rate = j_coupling * n_spins * epsilon / hbar
    g = lambda tau: stability_residual(tau, rate, tau_u)  # noqa: E731

    hi = float(tau_u)
    # g -> -inf as tau -> 0; walk down by decades from tau_u until negative
    lo = hi
    while g(lo) >= 0.0:
        lo *= 1e-3
        if lo < 1e-300:
            raise DegenerateParameterError(f"no sign change of the stability residual below tau_u={tau_u}")
    if g(hi) <= 0.0:
        raise DegenerateParameterError(f"stability residual not positive at tau_u={tau_u}")

    it = 0
    while it < max_iter:
        mid = math.sqrt(lo) * math.sqrt(hi)
        if not lo < mid < hi:
            mid = 0.5 * (lo + hi)
            if not lo < mid < hi:
                break
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        it += 1
    root = lo if abs(g(lo)) <= abs(g(hi)) else hi
    return StabilityBound(j_coupling, n_spins, epsilon, tau_u, hbar, root, abs(g(root)), it)


def escape_probability(delta_theta: float) -> float:
    """Chance that a uniformly drawn cos(chi) pushes a state at ``delta_theta`` off the pole."""
    if not 0.0 < delta_theta <= math.pi:
        raise ValueError("delta_theta must lie in (0, pi]")
    return math.sin(0.5 * delta_theta) ** 2


def escape_fraction(
    delta_theta: float,
    trials: int,
    seed: int = 0,
    rate_tau_r: float = 10.0,
    horizon_tau_r: float = 1e4,
    steps_per_tau_r: int = 20,
    b: float = 1.0,
    backend: str | None = None,
) -> float:
    """Fraction of runs started at ``theta = delta_theta`` that ever leave ``[0, 2 delta_theta]``.

    Time is measured in units of the collapse time (rate = 1) with
    poisson-resampled noise of correlation time ``rate_tau_r``; each run
    lasts ``horizon_tau_r`` correlation times.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    tau_r = float(rate_tau_r)
    dt = tau_r / steps_per_tau_r
    substeps = max(1, math.ceil((1.0 + b) * dt / 0.1))
    n_steps = int(round(horizon_tau_r * tau_r / dt))
    kern = get_backend(backend)
    flags = kern.escape_flags(
        np.full(trials, float(delta_theta)),
        np.arange(trials, dtype=np.uint64),
        seed, 1.0, b, NoiseMode.POISSON_RESAMPLE.code, tau_r, dt, substeps, n_steps,
        2.0 * delta_theta,
    )
    return float(np.count_nonzero(flags)) / trials
