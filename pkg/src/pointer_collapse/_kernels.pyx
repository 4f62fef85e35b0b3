# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled trajectory kernels.

Operation-for-operation mirror of ``_kernels_py``: same RK4 arithmetic, same
random-number consumption order, same clamping, so outcomes agree exactly.
"""
import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport sin, cos, log1p, M_PI
from libc.stdint cimport int8_t, int64_t, uint64_t
from numpy.random cimport bitgen_t
from numpy.random import Philox

cnp.import_array()

cdef enum:
    UNRESOLVED = 0
    UP_DOWN = 1
    DOWN_UP = 2

cdef enum:
    FROZEN = 0
    PER_STEP = 1
    POISSON = 2

cdef int64_t MAX_GAP = 4611686018427387904  # 2**62, as in noise.MAX_GAP


cdef inline double pole_sin(double theta) noexcept nogil:
    if theta == 0.0 or theta == M_PI:
        return 0.0
    return sin(theta)


cdef inline double rk4_theta(double theta, double bc, double rate, double h) noexcept nogil:
    cdef double k1, k2, k3, k4, t
    k1 = -rate * pole_sin(theta) * (cos(theta) - bc)
    t = theta + 0.5 * h * k1
    k2 = -rate * pole_sin(t) * (cos(t) - bc)
    t = theta + 0.5 * h * k2
    k3 = -rate * pole_sin(t) * (cos(t) - bc)
    t = theta + h * k3
    k4 = -rate * pole_sin(t) * (cos(t) - bc)
    theta = theta + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if theta < 0.0:
        return 0.0
    if theta > M_PI:
        return M_PI
    return theta


cdef inline int64_t gap(bitgen_t *rng, int mode, double tau_r, double dt) noexcept nogil:
    cdef double g
    if mode == POISSON:
        g = -log1p(-rng.next_double(rng.state)) * tau_r / dt
        if g >= <double>MAX_GAP:
            return MAX_GAP
        return 1 + <int64_t>g
    if mode == PER_STEP:
        return 1
    return -1


cdef inline double draw_cos(bitgen_t *rng) noexcept nogil:
    return 2.0 * rng.next_double(rng.state) - 1.0


def _generators(uint64_t seed, cnp.uint64_t[::1] streams):
    """Philox generators keyed by (seed, stream); the list keeps them alive."""
    cdef Py_ssize_t i, n = streams.shape[0]
    gens = []
    ptrs = np.empty(n, dtype=np.uintp)
    cdef cnp.uintp_t[::1] pv = ptrs
    key = np.empty(2, dtype=np.uint64)
    key[0] = seed
    for i in range(n):
        key[1] = streams[i]
        g = Philox(key=key)
        gens.append(g)
        pv[i] = <cnp.uintp_t>PyCapsule_GetPointer(g.capsule, "BitGenerator")
    return gens, ptrs



def simulate_outcomes(theta0, streams, uint64_t seed, double rate, double b, int mode,
                      double tau_r, double dt, int substeps, int64_t max_steps,
                      double delta_theta):
    cdef double[::1] th0 = np.ascontiguousarray(theta0, dtype=np.float64)
    cdef cnp.uint64_t[::1] st = np.ascontiguousarray(streams, dtype=np.uint64)
    cdef Py_ssize_t n = th0.shape[0], i
    out_outcome = np.zeros(n, dtype=np.int8)
    out_steps = np.zeros(n, dtype=np.int64)
    out_final = np.empty(n, dtype=np.float64)
    cdef int8_t[::1] oc = out_outcome
    cdef int64_t[::1] ost = out_steps
    cdef double[::1] ofin = out_final
    gens, ptrs = _generators(seed, st)
    cdef cnp.uintp_t[::1] pv = ptrs
    cdef bitgen_t *rng
    cdef double h = dt / substeps
    cdef double lo = delta_theta, hi = M_PI - delta_theta
    cdef double theta, bc
    cdef int64_t remaining, k
    cdef int result, s
    with nogil:
        for i in range(n):
            rng = <bitgen_t *><void *>pv[i]
            theta = th0[i]
            bc = b * draw_cos(rng)
            remaining = gap(rng, mode, tau_r, dt)
            result = UNRESOLVED
            if theta <= lo:
                result = UP_DOWN
            elif theta >= hi:
                result = DOWN_UP
            k = 0
            while result == UNRESOLVED and k < max_steps:
                for s in range(substeps):
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
                        bc = b * draw_cos(rng)
                        remaining = gap(rng, mode, tau_r, dt)
            oc[i] = result
            ost[i] = k
            ofin[i] = theta
    del gens
    return out_outcome, out_steps, out_final


def escape_flags(theta0, streams, uint64_t seed, double rate, double b, int mode,
                 double tau_r, double dt, int substeps, int64_t n_steps, double band):
    cdef double[::1] th0 = np.ascontiguousarray(theta0, dtype=np.float64)
    cdef cnp.uint64_t[::1] st = np.ascontiguousarray(streams, dtype=np.uint64)
    cdef Py_ssize_t n = th0.shape[0], i
    out = np.zeros(n, dtype=np.bool_)
    cdef cnp.npy_bool[::1] esc = out
    gens, ptrs = _generators(seed, st)
    cdef cnp.uintp_t[::1] pv = ptrs
    cdef bitgen_t *rng
    cdef double h = dt / substeps
    cdef double theta, bc
    cdef int64_t remaining, k
    cdef int s
    with nogil:
        for i in range(n):
            rng = <bitgen_t *><void *>pv[i]
            theta = th0[i]
            bc = b * draw_cos(rng)
            remaining = gap(rng, mode, tau_r, dt)
            k = 0
            while k < n_steps:
                for s in range(substeps):
                    theta = rk4_theta(theta, bc, rate, h)
                if theta > band:
                    esc[i] = 1
                    break
                if cos(theta) >= b:
                    break
                k += 1
                if remaining > 0:
                    remaining -= 1
                    if remaining == 0:
                        bc = b * draw_cos(rng)
                        remaining = gap(rng, mode, tau_r, dt)
    del gens
    return out
