"""Pure-Python reference kernels.

Used when the compiled extension is unavailable (or when
``POINTER_COLLAPSE_BACKEND=python``).  The compiled module in
``_kernels.pyx`` mirrors these functions operation by operation, including
the order in which random numbers are drawn, so both backends classify every
trajectory identically.
"""
from __future__ import annotations

import math

import numpy as np

from .noise import make_rng, waiting_steps

UNRESOLVED, UP_DOWN, DOWN_UP = 0, 1, 2
FROZEN, PER_STEP, POISSON = 0, 1, 2

PI = math.pi


def _pole_sin(theta):
    if theta == 0.0 or theta == PI:
        return 0.0
    return math.sin(theta)


def rk4_theta(theta, bc, rate, h):
    """One RK4 step of d theta/dt = -rate sin(theta) (cos(theta) - bc), clamped to [0, pi]."""
    try:
        return _rk4_theta(theta, bc, rate, h)
    except ValueError:
        # math.sin/cos raise on infinities where C returns nan
        return math.nan


def _rk4_theta(theta, bc, rate, h):
    k1 = -rate * _pole_sin(theta) * (math.cos(theta) - bc)
    t = theta + 0.5 * h * k1
    k2 = -rate * _pole_sin(t) * (math.cos(t) - bc)
    t = theta + 0.5 * h * k2
    k3 = -rate * _pole_sin(t) * (math.cos(t) - bc)
    t = theta + h * k3
    k4 = -rate * _pole_sin(t) * (math.cos(t) - bc)
    theta = theta + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if theta < 0.0:
        return 0.0
    if theta > PI:
        return PI
    return theta


def _gap(rng, mode, tau_r, dt):
    if mode == POISSON:
        return waiting_steps(rng.random(), tau_r, dt)
    if mode == PER_STEP:
        return 1
    return -1


def simulate_outcomes(theta0, streams, seed, rate, b, mode, tau_r, dt, substeps, max_steps, delta_theta):
    """Integrate theta for each (theta0[i], streams[i]) until a pole region or ``max_steps``.

    Returns ``(outcome, steps_used, theta_final)`` arrays.  ``steps_used[i] < 0``
    flags a non-finite state; its magnitude minus one is the offending step.
    """
    theta0 = np.asarray(theta0, dtype=np.float64)
    streams = np.asarray(streams, dtype=np.uint64)
    n = theta0.size
    outcome = np.zeros(n, dtype=np.int8)
    steps = np.zeros(n, dtype=np.int64)
    final = np.empty(n, dtype=np.float64)
    h = dt / substeps
    lo, hi = delta_theta, PI - delta_theta
    for i in range(n):
        theta = float(theta0[i])
        rng = make_rng(seed, int(streams[i]))
        bc = b * (2.0 * rng.random() - 1.0)
        remaining = _gap(rng, mode, tau_r, dt)
        result = UNRESOLVED
        if theta <= lo:
            result = UP_DOWN
        elif theta >= hi:
            result = DOWN_UP
        k = 0
        while result == UNRESOLVED and k < max_steps:
            for _ in range(substeps):
                theta = rk4_theta(theta, bc, rate, h)
                if theta <= lo:
                    result = UP_DOWN
                    break
                if theta >= hi:
                    result = DOWN_UP
                    break
                if theta != theta:
                    break
            k += 1
            if theta != theta:
                k = -k
                break
            if remaining > 0:
                remaining -= 1
                if remaining == 0:
                    bc = b * (2.0 * rng.random() - 1.0)
                    remaining = _gap(rng, mode, tau_r, dt)
        outcome[i] = result
        steps[i] = k
        final[i] = theta
    return outcome, steps, final


def escape_flags(theta0, streams, seed, rate, b, mode, tau_r, dt, substeps, n_steps, band):
    """For each trajectory, report whether theta ever exceeds ``band`` within ``n_steps``."""
    theta0 = np.asarray(theta0, dtype=np.float64)
    streams = np.asarray(streams, dtype=np.uint64)
    n = theta0.size
    escaped = np.zeros(n, dtype=np.bool_)
    h = dt / substeps
    for i in range(n):
        theta = float(theta0[i])
        rng = make_rng(seed, int(streams[i]))
        bc = b * (2.0 * rng.random() - 1.0)
        remaining = _gap(rng, mode, tau_r, dt)
        k = 0
        while k < n_steps:
            for _ in range(substeps):
                theta = rk4_theta(theta, bc, rate, h)
            if theta > band:
                escaped[i] = True
                break
            if math.cos(theta) >= b:
                # cos(theta) - b cos(chi) > 0 for every chi: theta can only shrink from here
                break
            k += 1
            if remaining > 0:
                remaining -= 1
                if remaining == 0:
                    bc = b * (2.0 * rng.random() - 1.0)
                    remaining = _gap(rng, mode, tau_r, dt)
    return escaped
