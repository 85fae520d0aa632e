# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: single-flip Metropolis and Gray-code exhaustive search.

Must stay in lockstep with ``_pycore.py``; the test suite compares the two
backends bit for bit on seeded runs.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef uint64_t _GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t _MIX1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t _MIX2 = 0x94D049BB133111EBULL
cdef double _TWO_M53 = 1.0 / 9007199254740992.0
cdef int64_t _RESYNC = 1 << 16


cdef inline uint64_t _next(uint64_t* state) nogil:
    cdef uint64_t z
    state[0] += _GOLDEN
    z = state[0]
    z = (z ^ (z >> 30)) * _MIX1
    z = (z ^ (z >> 27)) * _MIX2
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t* state) nogil:
    return (_next(state) >> 11) * _TWO_M53


def anneal(h, indptr, indices, data, bint spin, temps, int64_t moves,
           uint64_t seed, init=None):
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef const int64_t[::1] ptr = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const int64_t[::1] nbr = np.ascontiguousarray(indices, dtype=np.int64)
    cdef const double[::1] w = np.ascontiguousarray(data, dtype=np.float64)
    cdef const double[::1] tv = np.ascontiguousarray(temps, dtype=np.float64)
    cdef int64_t n = hv.shape[0]
    cdef int64_t n_sweeps = tv.shape[0]
    cdef uint64_t state = seed
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cfg_arr = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] cfg = cfg_arr
    cdef int64_t k, p, s, m, delta
    cdef double acc, energy, best, de, t

    if init is None:
        for k in range(n):
            if spin:
                cfg[k] = 1 - 2 * <int64_t>(_next(&state) >> 63)
            else:
                cfg[k] = <int64_t>(_next(&state) >> 63)
    else:
        cfg_arr[:] = np.asarray(init, dtype=np.int64)

    cdef double[::1] field = np.empty(n, dtype=np.float64)
    for k in range(n):
        acc = 0.0
        for p in range(ptr[k], ptr[k + 1]):
            acc += w[p] * cfg[nbr[p]]
        field[k] = hv[k] + acc
    energy = 0.0
    for k in range(n):
        energy += cfg[k] * (hv[k] + 0.5 * (field[k] - hv[k]))

    best = energy
    cdef cnp.ndarray[cnp.int64_t, ndim=1] best_arr = cfg_arr.copy()
    cdef int64_t[::1] best_cfg = best_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] trace = np.empty(n_sweeps)

    with nogil:
        for s in range(n_sweeps):
            t = tv[s]
            for m in range(moves):
                k = <int64_t>(_next(&state) % <uint64_t>n)
                if spin:
                    de = -2.0 * cfg[k] * field[k]
                else:
                    de = (1 - 2 * cfg[k]) * field[k]
                if de > 0.0:
                    if t <= 0.0 or _uniform(&state) >= exp(-de / t):
                        continue
                if spin:
                    delta = -2 * cfg[k]
                else:
                    delta = 1 - 2 * cfg[k]
                cfg[k] += delta
                for p in range(ptr[k], ptr[k + 1]):
                    field[nbr[p]] += w[p] * delta
                energy += de
                if energy < best:
                    best = energy
                    best_cfg[:] = cfg
            trace[s] = best
    return best_arr.astype(np.int8), best, trace


cdef double _full_energy(const double[::1] hv, const double[:, ::1] wv, double[::1] v,
                         double[::1] field, int64_t n) nogil:
    cdef int64_t k, l
    cdef double acc, energy = 0.0
    for k in range(n):
        acc = hv[k]
        for l in range(n):
            acc += wv[k, l] * v[l]
        field[k] = acc
    for k in range(n):
        energy += v[k] * (hv[k] + 0.5 * (field[k] - hv[k]))
    return energy


def exhaustive_minimum(h, w, bint spin):
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef const double[:, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef int64_t n = hv.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int8), 0.0
    if n > 40:
        raise ValueError("exhaustive search limited to 40 variables")
    cdef double[::1] v = np.full(n, 1.0 if spin else 0.0)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] best_arr = np.asarray(v).copy()
    cdef double[::1] best_v = best_arr
    cdef double[::1] field = np.empty(n)
    cdef double energy, best, delta
    cdef uint64_t t, total = (<uint64_t>1) << n
    cdef int64_t k, l

    with nogil:
        energy = _full_energy(hv, wv, v, field, n)
        best = energy
        t = 1
        while t < total:
            k = 0
            while not ((t >> k) & 1):
                k += 1
            if spin:
                delta = -2.0 * v[k]
                energy += -2.0 * v[k] * field[k]
            else:
                delta = 1.0 - 2.0 * v[k]
                energy += (1.0 - 2.0 * v[k]) * field[k]
            v[k] += delta
            for l in range(n):
                field[l] += wv[l, k] * delta
            if (t & (_RESYNC - 1)) == 0:
                energy = _full_energy(hv, wv, v, field, n)
            if energy < best:
                best = energy
                best_v[:] = v
            t += 1
    return best_arr.astype(np.int8), best
