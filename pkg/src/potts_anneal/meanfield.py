"""Mean-field transverse-field analysis of the fully connected ferromagnetic
Potts model under the one-hot and half-hot constraints.

The order parameters are split into two groups, ``m_plus`` (repeated
``n_plus`` times) and ``m_minus`` (``n_minus`` times): ``(Q-1, 1)`` for
one-hot and ``(Q/2, Q/2)`` for half-hot. ``beta = math.inf`` selects the
ground-state free energy; any finite ``beta`` uses the full spectrum.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence, TextIO

import numpy as np
from scipy.optimize import bisect, minimize

from .errors import CapacityError, DomainError, UnsupportedConfigurationError

ONE_HOT = "one_hot"
HALF_HOT = "half_hot"
CONSTRAINTS = (ONE_HOT, HALF_HOT)
FIRST_ORDER = "first_order"
SECOND_ORDER = "second_order"

MAX_Q = 12
GRID_POINTS = 41
N_STARTS = 5
F_TOL = 1e-8
JUMP_THRESHOLD = 0.2
CSV_COLUMNS = ("gamma", "m_plus", "m_minus", "free_energy", "eps_min")


@dataclass(frozen=True)
class MeanFieldParams:
    J: float = 1.0
    lam: float = 1.0
    Q: int = 2
    constraint: str = ONE_HOT
    beta: float = math.inf
    gamma: float = 0.0

    def __post_init__(self):
        if not self.J > 0:
            raise DomainError("J must be positive")
        if not self.lam >= 0:
            raise DomainError("lambda must be >= 0")
        if self.Q < 2:
            raise DomainError("Q must be >= 2")
        if self.constraint not in (ONE_HOT, HALF_HOT):
            raise DomainError(f"constraint must be {ONE_HOT!r} or {HALF_HOT!r}")
        if self.constraint == HALF_HOT and self.Q % 2:
            raise UnsupportedConfigurationError("half-hot needs an even Q")
        if not self.beta > 0:
            raise DomainError("beta must be positive (math.inf for the ground state)")
        if not self.gamma >= 0:
            raise DomainError("gamma must be >= 0")

    @property
    def zero_temperature(self) -> bool:
        return math.isinf(self.beta)

    @property
    def group_sizes(self) -> tuple[int, int]:
        if self.constraint == ONE_HOT:
            return self.Q - 1, 1
        return self.Q // 2, self.Q // 2

    @property
    def longitudinal_field(self) -> float:
        """Uniform field the constraint term adds to every component."""
        if self.constraint == ONE_HOT:
            return self.lam * (self.Q - 2) / self.Q
        return 0.0

    def expand(self, m_plus: float, m_minus: float) -> np.ndarray:
        n_plus, n_minus = self.group_sizes
        return np.array([m_plus] * n_plus + [m_minus] * n_minus, dtype=np.float64)


@dataclass(frozen=True)
class OrderPoint:
    gamma: float
    m_plus: float
    m_minus: float
    free_energy: float
    eps_min: float


@dataclass(frozen=True)
class SweepResult:
    points: tuple[OrderPoint, ...]
    classification: str
    gamma_star: float | None
    max_jump: float

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])


# ------------------------------------------------------------ Hamiltonian

@lru_cache(maxsize=None)
def _basis(q: int) -> tuple[np.ndarray, np.ndarray]:
    """z-basis spins (dim, Q) and single-flip neighbour table (dim, Q).

    Component 0 is the most significant bit; bit value 1 means spin -1.
    """
    dim = 1 << q
    idx = np.arange(dim)
    shifts = q - 1 - np.arange(q)
    bits = (idx[:, None] >> shifts[None, :]) & 1
    spins = (1 - 2 * bits).astype(np.float64)
    flips = idx[:, None] ^ (1 << shifts)[None, :]
    spins.setflags(write=False)
    flips.setflags(write=False)
    return spins, flips


def _check_q(q: int) -> None:
    if q > MAX_Q:
        raise CapacityError(f"dense effective Hamiltonian limited to Q <= {MAX_Q}, got {q}")


def _diagonals(p: MeanFieldParams, m: np.ndarray) -> np.ndarray:
    """Diagonal of the effective Hamiltonian for a batch of m-vectors (B, Q)."""
    spins, _ = _basis(p.Q)
    total = spins.sum(axis=1)
    penalty = p.lam / (2.0 * p.Q) * total ** 2
    fields = p.J * m + p.longitudinal_field
    return penalty[None, :] - fields @ spins.T


def _assemble(p: MeanFieldParams, diag: np.ndarray) -> np.ndarray:
    _, flips = _basis(p.Q)
    dim = 1 << p.Q
    h = np.zeros(diag.shape[:-1] + (dim, dim))
    rows = np.repeat(np.arange(dim), p.Q)
    h[..., rows, flips.reshape(-1)] = -p.gamma
    h[..., np.arange(dim), np.arange(dim)] = diag
    return h


def build_effective_hamiltonian(p: MeanFieldParams, m: Sequence[float]) -> np.ndarray:
    """Single-site effective Hamiltonian over the 2^Q z-basis states.

    Diagonal ``(lam/2Q)(sum s)^2 - sum_q h_q s_q`` with ``h_q = J m_q`` plus the
    one-hot longitudinal field; ``-gamma`` between states one flip apart.
    """
    _check_q(p.Q)
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (p.Q,):
        raise DomainError(f"m must have {p.Q} entries")
    if np.any(np.abs(m) > 1.0):
        raise DomainError("order parameters must lie in [-1, 1]")
    return _assemble(p, _diagonals(p, m[None, :]))[0]


def ground_energy(h: np.ndarray) -> float:
    """Lowest eigenvalue of a real symmetric matrix."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DomainError("expected a square matrix")
    if not np.array_equal(h, h.T):
        raise DomainError("matrix is not symmetric")
    return float(np.linalg.eigvalsh(h)[0])


def symmetric_sector_ground_energy(p: MeanFieldParams, m_plus: float, m_minus: float) -> float:
    """Lowest eigenvalue restricted to the permutation-symmetric sector.

    Basis states are labelled by the number of down spins in each group, so
    the dimension is ``(n_plus + 1)(n_minus + 1)`` instead of ``2^Q``. The
    stoquastic ground state is permutation symmetric, so for ``gamma > 0``
    this equals the dense result; at ``gamma = 0`` the diagonal minimum is
    reached by a symmetric state as well.
    """
    n_plus, n_minus = p.group_sizes
    kp, km = np.meshgrid(np.arange(n_plus + 1), np.arange(n_minus + 1), indexing="ij")
    kp, km = kp.ravel(), km.ravel()
    s_plus = n_plus - 2 * kp
    s_minus = n_minus - 2 * km
    b = p.longitudinal_field
    diag = (p.lam / (2.0 * p.Q) * (s_plus + s_minus) ** 2
            - (p.J * m_plus + b) * s_plus - (p.J * m_minus + b) * s_minus)
    dim = len(diag)
    h = np.diag(diag.astype(np.float64))
    stride = n_minus + 1
    for a in range(dim):
        if kp[a] < n_plus:
            amp = -p.gamma * math.sqrt((n_plus - kp[a]) * (kp[a] + 1))
            h[a, a + stride] = h[a + stride, a] = amp
        if km[a] < n_minus:
            amp = -p.gamma * math.sqrt((n_minus - km[a]) * (km[a] + 1))
            h[a, a + 1] = h[a + 1, a] = amp
    return float(np.linalg.eigvalsh(h)[0])


# ------------------------------------------------------------ free energy

def _free_energies(p: MeanFieldParams, m_plus: np.ndarray, m_minus: np.ndarray,
                   chunk_bytes: int = 1 << 27) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``(f, eps_min)`` over arrays of grouped order parameters."""
    _check_q(p.Q)
    n_plus, n_minus = p.group_sizes
    m_plus = np.atleast_1d(np.asarray(m_plus, dtype=np.float64))
    m_minus = np.atleast_1d(np.asarray(m_minus, dtype=np.float64))
    m = np.concatenate([np.repeat(m_plus[:, None], n_plus, axis=1),
                        np.repeat(m_minus[:, None], n_minus, axis=1)], axis=1)
    dim = 1 << p.Q
    step = max(1, chunk_bytes // (8 * dim * dim))
    f = np.empty(len(m))
    eps = np.empty(len(m))
    for start in range(0, len(m), step):
        block = m[start:start + step]
        evals = np.linalg.eigvalsh(_assemble(p, _diagonals(p, block)))
        e0 = evals[:, 0]
        quad = 0.5 * p.J * np.sum(block ** 2, axis=1)
        if p.zero_temperature:
            f[start:start + step] = quad + e0
        else:
            rel = np.exp(-p.beta * (evals - e0[:, None]))
            f[start:start + step] = quad + e0 - np.log(rel.sum(axis=1)) / p.beta
        eps[start:start + step] = e0
    return f, eps


def free_energy(p: MeanFieldParams, m_plus: float, m_minus: float) -> tuple[float, float]:
    """``(f, eps_min)`` at the grouped order parameters."""
    if abs(m_plus) > 1.0 or abs(m_minus) > 1.0:
        raise DomainError("order parameters must lie in [-1, 1]")
    f, eps = _free_energies(p, m_plus, m_minus)
    return float(f[0]), float(eps[0])


def _magnetisations(p: MeanFieldParams, m_plus: float, m_minus: float) -> np.ndarray:
    """Group-averaged ``<s_q>`` in the ground state (or thermal state)."""
    n_plus, _ = p.group_sizes
    spins, _ = _basis(p.Q)
    h = _assemble(p, _diagonals(p, p.expand(m_plus, m_minus)[None, :]))[0]
    evals, vecs = np.linalg.eigh(h)
    if p.zero_temperature:
        weights = vecs[:, 0] ** 2
    else:
        boltz = np.exp(-p.beta * (evals - evals[0]))
        weights = (vecs ** 2) @ (boltz / boltz.sum())
    s = weights @ spins
    return np.array([s[:n_plus].mean(), s[n_plus:].mean()])


def _polish(p: MeanFieldParams, x: np.ndarray, fx: float, max_iter: int = 40) -> tuple[np.ndarray, float]:
    """Newton refinement of the stationarity condition ``m = <s>``.

    ``<s>`` is the Hellmann-Feynman derivative of the eigenvalue term, so the
    gradient is available in closed form. A step is kept when it shrinks the
    residual without raising f above round-off; f alone cannot resolve the
    last digits because it is quadratic in the error.
    """
    def residual(y):
        return y - _magnetisations(p, y[0], y[1])

    g = residual(x)
    for _ in range(max_iter):
        gnorm = np.max(np.abs(g))
        if gnorm < 1e-14:
            break
        jac = np.empty((2, 2))
        eps = 1e-6
        for k in range(2):
            d = np.zeros(2)
            d[k] = eps
            jac[:, k] = (residual(x + d) - residual(x - d)) / (2 * eps)
        try:
            step = np.linalg.solve(jac, g)
        except np.linalg.LinAlgError:
            step = g
        if not np.all(np.isfinite(step)):
            step = g
        for scale in (1.0, 0.5, 0.25, 0.125):
            y = np.clip(x - scale * step, -1.0, 1.0)
            gy = residual(y)
            fy = float(_free_energies(p, y[0], y[1])[0][0])
            if np.max(np.abs(gy)) < gnorm and fy <= fx + 1e-12:
                break
        else:
            break
        x, fx, g = y, min(fx, fy), gy
    return x, float(_free_energies(p, x[0], x[1])[0][0])


def minimize_free_energy(p: MeanFieldParams) -> OrderPoint:
    """Global minimum of f over ``(m_plus, m_minus)`` in ``[-1, 1]^2``.

    A 41x41 grid locates candidate basins; Nelder-Mead refines the five best
    cells and the winner is polished with Newton steps on ``m = <s>``.
    """
    axis = np.linspace(-1.0, 1.0, GRID_POINTS)
    gp, gm = np.meshgrid(axis, axis, indexing="ij")
    f_grid, _ = _free_energies(p, gp.ravel(), gm.ravel())
    starts = np.argsort(f_grid, kind="stable")[:N_STARTS]

    def objective(y):
        y = np.clip(y, -1.0, 1.0)
        return float(_free_energies(p, y[0], y[1])[0][0])

    best_x, best_f = None, math.inf
    for k in starts:
        x0 = np.array([gp.ravel()[k], gm.ravel()[k]])
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"xatol": F_TOL, "fatol": F_TOL, "maxiter": 4000,
                                "initial_simplex": [x0, x0 + [0.05, 0], x0 + [0, 0.05]]})
        x = np.clip(res.x, -1.0, 1.0)
        fx = objective(x)
        if fx < best_f:
            best_x, best_f = x, fx
    x, _ = _polish(p, best_x, best_f)
    n_plus, n_minus = p.group_sizes
    if n_plus == n_minus and x[0] < x[1]:
        x = x[::-1]
    elif x[0] < x[1] and x[1] - x[0] < 1e-10:
        # symmetric phase; the split is round-off
        x = np.full(2, 0.5 * (x[0] + x[1]))
    f, eps = free_energy(p, float(x[0]), float(x[1]))
    return OrderPoint(p.gamma, float(x[0]), float(x[1]), f, eps)


def gamma_grid(gamma_max: float, gamma_step: float) -> np.ndarray:
    """Decreasing grid ``gamma_max, gamma_max - step, ..., 0``."""
    if not gamma_step > 0:
        raise DomainError("gamma_step must be positive")
    if not gamma_max >= 0:
        raise DomainError("gamma_max must be >= 0")
    n = int(math.floor(gamma_max / gamma_step + 1e-9))
    grid = gamma_max - gamma_step * np.arange(n + 1)
    grid = np.round(grid, 12)
    if grid[-1] > 1e-12:
        grid = np.append(grid, 0.0)
    grid[-1] = max(grid[-1], 0.0)
    return grid


def _solve_point(args):
    p, gamma = args
    return minimize_free_energy(replace(p, gamma=float(gamma)))


def classify(points: Sequence[OrderPoint], threshold: float = JUMP_THRESHOLD) -> tuple[str, float | None, float]:
    """``(classification, gamma_star, max_jump)`` from adjacent-point changes."""
    if len(points) < 2:
        return SECOND_ORDER, None, 0.0
    mp = np.array([pt.m_plus for pt in points])
    mm = np.array([pt.m_minus for pt in points])
    g = np.array([pt.gamma for pt in points])
    jumps = np.maximum(np.abs(np.diff(mp)), np.abs(np.diff(mm)))
    k = int(np.argmax(jumps))
    max_jump = float(jumps[k])
    label = FIRST_ORDER if max_jump >= threshold else SECOND_ORDER
    return label, round(float(0.5 * (g[k] + g[k + 1])), 12), max_jump


def sweep_gamma(p: MeanFieldParams, gamma_max: float = 2.0, gamma_step: float = 0.01,
                threads: int = 1) -> SweepResult:
    """Minimise f at every gamma from ``gamma_max`` down to 0."""
    grid = gamma_grid(gamma_max, gamma_step)
    jobs = [(p, g) for g in grid]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(_solve_point, jobs))
    else:
        points = [_solve_point(job) for job in jobs]
    label, gamma_star, max_jump = classify(points)
    return SweepResult(tuple(points), label, gamma_star, max_jump)


def write_sweep_csv(result: SweepResult, stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for pt in result.points:
        writer.writerow([f"{getattr(pt, c):.12g}" for c in CSV_COLUMNS])


def sweep_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    write_sweep_csv(result, buf)
    return buf.getvalue()


# ------------------------------------------------------------ Q -> infinity

def solve_infinite_q(J: float, gamma: float, beta: float = math.inf) -> float:
    """Largest non-negative root of ``m = (J m / Xi) tanh(beta Xi)``,
    ``Xi = sqrt((J m)^2 + gamma^2)``.

    Dividing out the trivial root leaves ``g(m) = J tanh(beta Xi)/Xi - 1``,
    which is decreasing in ``m``. A sign change on ``[0, 1]`` is bisected;
    otherwise only ``m = 0`` solves the equation.
    """
    if not J > 0:
        raise DomainError("J must be positive")
    if not gamma >= 0:
        raise DomainError("gamma must be >= 0")
    if not beta > 0:
        raise DomainError("beta must be positive")

    def g(m):
        xi = math.hypot(J * m, gamma)
        if xi == 0.0:
            return J * beta - 1.0
        if math.isinf(beta):
            return J / xi - 1.0
        return J * math.tanh(beta * xi) / xi - 1.0

    if gamma == 0.0:
        if math.isinf(beta):
            return 1.0
        if J * beta <= 1.0:
            return 0.0
        g0 = J * beta - 1.0
    else:
        g0 = g(0.0)
    if g0 <= 0.0:
        return 0.0
    if g(1.0) >= 0.0:
        return 1.0
    return float(bisect(g, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
