"""Pure-Python reference kernels.

These mirror ``_core.pyx`` operation for operation (same PRNG stream, same
order of floating-point updates) so that a seeded run gives the same answer
on either backend. They are slow; the compiled module is used when present.
"""
from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_TWO_M53 = 1.0 / 9007199254740992.0
_RESYNC = 1 << 16


class SplitMix64:
    """splitmix64 stream; identical to the generator in the compiled core."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next() >> 11) * _TWO_M53


def anneal(h, indptr, indices, data, spin, temps, moves, seed, init=None):
    """Single-flip Metropolis over a quadratic form.

    Returns ``(best_config, tracked_best_energy, trace)``; energies exclude
    the model offset.
    """
    n = len(h)
    rng = SplitMix64(seed)
    hl = [float(v) for v in h]
    ptr = [int(v) for v in indptr]
    nbr = [int(v) for v in indices]
    w = [float(v) for v in data]
    if init is None:
        if spin:
            cfg = [1 - 2 * (rng.next() >> 63) for _ in range(n)]
        else:
            cfg = [rng.next() >> 63 for _ in range(n)]
    else:
        cfg = [int(v) for v in init]

    field = hl[:]
    for k in range(n):
        acc = 0.0
        for p in range(ptr[k], ptr[k + 1]):
            acc += w[p] * cfg[nbr[p]]
        field[k] = hl[k] + acc
    energy = 0.0
    for k in range(n):
        energy += cfg[k] * (hl[k] + 0.5 * (field[k] - hl[k]))

    best = energy
    best_cfg = cfg[:]
    trace = np.empty(len(temps))
    for s, t in enumerate(temps):
        t = float(t)
        for _ in range(moves):
            k = rng.next() % n
            if spin:
                de = -2.0 * cfg[k] * field[k]
            else:
                de = (1 - 2 * cfg[k]) * field[k]
            if de > 0.0:
                if t <= 0.0 or rng.uniform() >= math.exp(-de / t):
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
    return np.asarray(best_cfg, dtype=np.int8), best, trace


def _block_states(n: int, spin: bool) -> np.ndarray:
    codes = np.arange(1 << n, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(n)[None, :]) & 1).astype(np.float64)
    return 1.0 - 2.0 * bits if spin else bits


def exhaustive_minimum(h, w, spin):
    """Minimum of ``sum h v + 1/2 v.W.v`` over all assignments.

    Splits the variables into a low and a high block and evaluates the cross
    term as a matrix product, one chunk of high-block states at a time. The
    returned configuration encodes bit ``k`` of the state index as variable
    ``k`` (``+1``/``0`` for a clear bit).
    """
    h = np.asarray(h, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n = len(h)
    if n == 0:
        return np.zeros(0, dtype=np.int8), 0.0
    n_lo = min(n, 14)
    n_hi = n - n_lo
    lo = _block_states(n_lo, spin)
    w_ll = w[:n_lo, :n_lo]
    e_lo = lo @ h[:n_lo] + 0.5 * np.einsum("si,ij,sj->s", lo, w_ll, lo)
    if n_hi == 0:
        idx = int(np.argmin(e_lo))
        return lo[idx].astype(np.int8), float(e_lo[idx])
    hi = _block_states(n_hi, spin)
    w_hh = w[n_lo:, n_lo:]
    e_hi = hi @ h[n_lo:] + 0.5 * np.einsum("si,ij,sj->s", hi, w_hh, hi)
    proj = lo @ w[:n_lo, n_lo:]
    chunk = max(1, (1 << 20) // len(lo))
    best = math.inf
    best_pair = (0, 0)
    for start in range(0, len(hi), chunk):
        block = hi[start:start + chunk]
        total = e_lo[:, None] + e_hi[None, start:start + chunk] + proj @ block.T
        flat = int(np.argmin(total))
        val = float(total.flat[flat])
        if val < best:
            best = val
            best_pair = (flat // total.shape[1], start + flat % total.shape[1])
    cfg = np.concatenate([lo[best_pair[0]], hi[best_pair[1]]]).astype(np.int8)
    return cfg, best
