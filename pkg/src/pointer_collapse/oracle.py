"""Amplitude-level reference integrator.

Integrates the two-component state ``(c_ud, c_du)`` under the mean-field,
non-Hermitian generator built directly from the sublattice operators::

    F = (4J/N)(1 + i eps) (<S_A^z> S_B^z + <S_B^z> S_A^z) + i eps B0 cos(chi) (S_A^z - S_B^z)

with ``S_A^z |ud> = +N/4 |ud>``, ``S_B^z |ud> = -N/4 |ud>`` (and the reverse
for ``|du>``), and the expectation values normalised by <psi|psi>.  Nothing
here uses the (theta, phi, xi, n) coordinates, which makes it an independent
check of the reduced Bloch equations.

The time derivative is ``d psi/dt = (i / hbar) F psi``; that orientation is
the one whose extracted theta obeys the collapse equation (the opposite
orientation reverses the flow).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import BlochState, ModelParams, wrap_phase
from .noise import NoisePath

__all__ = ["AmplitudeState", "AmplitudeSeries", "integrate_amplitudes", "extract_bloch", "amplitudes_from_bloch"]


@dataclass(frozen=True)
class AmplitudeState:
    """Amplitudes of |ud> and |du>; the true state is ``exp(log_scale) * (c_up, c_down)``."""

    c_up: complex
    c_down: complex
    log_scale: float = 0.0

    def __post_init__(self):
        if self.c_up == 0 and self.c_down == 0:
            raise ValueError("amplitudes cannot both vanish")
        for v in (self.c_up, self.c_down):
            if not cmath.isfinite(v):
                raise ValueError("amplitudes must be finite")

    def normalised(self) -> "AmplitudeState":
        nrm = math.hypot(abs(self.c_up), abs(self.c_down))
        return AmplitudeState(self.c_up / nrm, self.c_down / nrm, self.log_scale + math.log(nrm))


@dataclass
class AmplitudeSeries:
    t: np.ndarray
    c_up: np.ndarray
    c_down: np.ndarray
    log_scale: np.ndarray

    def __len__(self):
        return self.t.size

    def __getitem__(self, k) -> AmplitudeState:
        return AmplitudeState(complex(self.c_up[k]), complex(self.c_down[k]), float(self.log_scale[k]))

    def theta(self) -> np.ndarray:
        return 2.0 * np.arctan2(np.abs(self.c_down), np.abs(self.c_up))


def _generator_diagonal(c_up, c_down, params: ModelParams, cos_chi):
    """Diagonal of F for the current state (F is diagonal in the pointer basis)."""
    quarter = params.n_spins / 4.0
    sa = (quarter, -quarter)  # S_A^z on |ud>, |du>
    sb = (-quarter, quarter)
    w_up, w_dn = abs(c_up) ** 2, abs(c_down) ** 2
    norm2 = w_up + w_dn
    mean_a = (sa[0] * w_up + sa[1] * w_dn) / norm2
    mean_b = (sb[0] * w_up + sb[1] * w_dn) / norm2
    mf = 4.0 * params.j_coupling / params.n_spins * complex(1.0, params.epsilon)
    field = 1j * params.epsilon * params.b0 * cos_chi
    return tuple(mf * (mean_a * sb[k] + mean_b * sa[k]) + field * (sa[k] - sb[k]) for k in (0, 1))


def _deriv(c_up, c_down, params, cos_chi, orientation):
    f_up, f_dn = _generator_diagonal(c_up, c_down, params, cos_chi)
    pref = orientation * 1j / params.hbar
    return pref * f_up * c_up, pref * f_dn * c_down


def integrate_amplitudes(
    initial: AmplitudeState,
    params: ModelParams,
    path: NoisePath,
    dt: float,
    n_steps: int | None = None,
    orientation: int = 1,
) -> AmplitudeSeries:
    """RK4 in the complex amplitudes along ``path``, renormalising after every step.

    The growing or decaying norm of the non-unitary evolution is carried in
    ``log_scale`` so the stored amplitudes never overflow.  ``orientation=-1``
    integrates ``d psi/dt = -(i/hbar) F psi`` instead (for checking which sign
    reproduces the collapse equation).
    """
    if n_steps is None:
        n_steps = int(round(path.horizon / dt))
    cos_steps = path.cos_on_steps(dt, n_steps)
    start = initial.normalised()
    up, dn, scale = start.c_up, start.c_down, start.log_scale
    c_up = np.empty(n_steps + 1, dtype=complex)
    c_dn = np.empty(n_steps + 1, dtype=complex)
    logs = np.empty(n_steps + 1)
    c_up[0], c_dn[0], logs[0] = up, dn, scale
    for k in range(n_steps):
        cc = cos_steps[k]
        a1, b1 = _deriv(up, dn, params, cc, orientation)
        a2, b2 = _deriv(up + 0.5 * dt * a1, dn + 0.5 * dt * b1, params, cc, orientation)
        a3, b3 = _deriv(up + 0.5 * dt * a2, dn + 0.5 * dt * b2, params, cc, orientation)
        a4, b4 = _deriv(up + dt * a3, dn + dt * b3, params, cc, orientation)
        up = up + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        dn = dn + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
        nrm = math.hypot(abs(up), abs(dn))
        if not (nrm > 0 and math.isfinite(nrm)):
            raise ArithmeticError(f"amplitude norm degenerate at step {k}")
        up, dn = up / nrm, dn / nrm
        scale += math.log(nrm)
        c_up[k + 1], c_dn[k + 1], logs[k + 1] = up, dn, scale
    return AmplitudeSeries(dt * np.arange(n_steps + 1), c_up, c_dn, logs)


def extract_bloch(amp: AmplitudeState) -> BlochState:
    """(theta, phi, xi, ln n) of an amplitude pair; phases wrapped to [-pi, pi)."""
    a_up, a_dn = abs(amp.c_up), abs(amp.c_down)
    theta = 2.0 * math.atan2(a_dn, a_up)
    ph_up = cmath.phase(amp.c_up) if a_up > 0 else 0.0
    ph_dn = cmath.phase(amp.c_down) if a_dn > 0 else 0.0
    return BlochState(
        theta=min(max(theta, 0.0), math.pi),
        phi=wrap_phase(ph_up - ph_dn),
        xi=wrap_phase(ph_up + ph_dn),
        log_norm=amp.log_scale + 0.5 * math.log(a_up * a_up + a_dn * a_dn),
    )


def amplitudes_from_bloch(state: BlochState) -> AmplitudeState:
    up = cmath.exp(0.5j * (state.xi + state.phi)) * math.cos(0.5 * state.theta)
    dn = cmath.exp(0.5j * (state.xi - state.phi)) * math.sin(0.5 * state.theta)
    return AmplitudeState(up, dn, state.log_norm)
