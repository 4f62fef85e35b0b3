"""Minimal correlation time for stable collapse, and escape from a pole region."""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pointer_collapse.bounds import (
    AGE_OF_UNIVERSE_S,
    DegenerateParameterError,
    escape_fraction,
    escape_probability,
    stability_min_tau,
    stability_residual,
)

positive = st.floats(1e-12, 1e12)


def test_reference_root():
    # J N eps / hbar = 1e6 per second, tau_u = 4.4e17 s; the root agrees with
    # the closed form W(rate tau_u / 2) / (2 rate) evaluated by a Lambert-W routine
    sb = stability_min_tau(1e4, 100, 1.0, AGE_OF_UNIVERSE_S)
    assert sb.tau_r_min == pytest.approx(2.491955719694448e-05, rel=1e-14)
    assert sb.residual < 1e-10
    assert sb.collapse_rate == 1e6
    assert sb.delta_theta == pytest.approx(math.exp(-1e6 * sb.tau_r_min))


@given(positive, positive, st.floats(1e-6, 1e3), st.floats(1e-6, 1e30))
def test_residual_below_tolerance(j, n, eps, tau_u):
    sb = stability_min_tau(j, n, eps, tau_u)
    assert 0 < sb.tau_r_min <= tau_u
    assert abs(stability_residual(sb.tau_r_min, sb.collapse_rate, tau_u)) < 1e-10


def test_larger_system_needs_shorter_correlation_time():
    small = stability_min_tau(1.0, 100, 0.01)
    large = stability_min_tau(1.0, 200, 0.01)
    assert large.tau_r_min < small.tau_r_min


@pytest.mark.parametrize("args", [(0.0, 1, 1, 1), (1, -2, 1, 1), (1, 1, math.inf, 1), (1, 1, 1, 0.0), (1, 1, 1, math.nan)])
def test_degenerate_inputs(args):
    with pytest.raises(DegenerateParameterError):
        stability_min_tau(*args)


def test_residual_is_increasing():
    taus = np.logspace(-12, 10, 200)
    g = [stability_residual(t, 3.0, 1e10) for t in taus]
    assert np.all(np.diff(g) > 0)


def test_escape_probability_examples():
    assert escape_probability(math.pi) == 1.0
    assert escape_probability(math.pi / 2) == pytest.approx(0.5)
    assert escape_probability(1e-3) == pytest.approx(2.499999791666674e-07, rel=1e-14)
    with pytest.raises(ValueError):
        escape_probability(0.0)


def test_escape_fraction_is_deterministic_and_bounded(backend):
    a = escape_fraction(0.3, 500, seed=4, backend=backend)
    b = escape_fraction(0.3, 500, seed=4, backend=backend)
    assert a == b
    assert a <= 1e5 * escape_probability(0.3)


def test_escape_needs_a_field_stronger_than_the_pole_pull():
    # b < 1 can never lift theta off a near-pole state
    assert escape_fraction(0.3, 300, b=0.5, horizon_tau_r=100) == 0.0
