"""Replica-symmetric, static-approximation saddle point of the fully connected
Potts glass under the half-hot constraint, in the large-Q limit.

In that limit the cross-component overlaps and the per-site balance vanish
(``theta = phi = M = 0``) and the equations for ``(m, xi, eta)`` are those of
the transverse-field SK model. Double Gaussian integrals use a tensor-product
Gauss-Hermite rule; the inner ``v`` averages are taken in the log domain so
large ``beta`` does not overflow.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, TextIO

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import integrate
from scipy.optimize import brentq

from .errors import DomainError

DEFAULT_ORDER = 128
MIN_ORDER = 8
MAX_ORDER = 256
NEAR_CRITICAL_ITERATIONS = 1000
SCAN_COLUMNS = ("beta", "gamma", "J0", "m", "xi", "eta", "converged", "iterations")


@dataclass(frozen=True)
class GlassParams:
    J: float = 1.0
    J0: float = 0.0
    lam: float = 1.0
    gamma: float = 0.0
    beta: float = 1.0
    Q: float = math.inf

    def __post_init__(self):
        if not self.J > 0:
            raise DomainError("J must be positive")
        if not self.lam >= 0:
            raise DomainError("lambda must be >= 0")
        if not self.gamma >= 0:
            raise DomainError("gamma must be >= 0")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise DomainError("beta must be positive and finite")
        if not (math.isinf(self.Q) or (self.Q >= 2 and self.Q % 2 == 0)):
            raise DomainError("Q must be an even integer or infinity")


@dataclass(frozen=True)
class RSOrderParams:
    m: float = 0.0
    xi: float = 0.5
    eta: float = 1.0
    theta: float = 0.0
    phi: float = 0.0
    M: float = 0.0

    def check(self) -> None:
        if self.xi < 0:
            raise DomainError("xi must be >= 0")
        if self.eta < self.xi:
            raise DomainError("eta must be >= xi")

    def as_array(self) -> np.ndarray:
        return np.array([self.m, self.xi, self.eta])


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Nodes and weights of ``E[f(u)]`` for ``u ~ N(0, 1)``."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def integrate(self, values: np.ndarray, axis: int = -1) -> np.ndarray:
        return np.tensordot(values, self.weights, axes=([axis], [0]))


def gauss_hermite_grid(order: int = DEFAULT_ORDER) -> QuadratureGrid:
    """Probabilists' Gauss-Hermite rule normalised to the standard normal."""
    if not MIN_ORDER <= order <= MAX_ORDER:
        raise DomainError(f"quadrature order must lie in [{MIN_ORDER}, {MAX_ORDER}]")
    x, w = hermegauss(order)
    w = w / math.sqrt(2.0 * math.pi)
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureGrid(x, w, order)


def _inner_ratios(h: np.ndarray, gamma: float, beta: float, wv: np.ndarray):
    """Per-``u`` inner averages over ``v`` (the last axis of ``h``).

    Returns ``(A, B)`` with
    ``A = <(H/Xi) sinh(beta Xi)>_v / <cosh(beta Xi)>_v`` and
    ``B = <(H^2/Xi^2) cosh + gamma^2/(beta Xi^3) sinh>_v / <cosh>_v``.
    """
    xi = np.hypot(h, gamma)
    x = beta * xi
    top = np.max(x, axis=-1, keepdims=True)
    ep = np.exp(x - top)
    em = np.exp(-x - top)
    cosh_s = 0.5 * (ep + em)
    sinh_s = 0.5 * (ep - em)
    if gamma > 0:
        direction = h / xi
        longitudinal = direction ** 2
        # gamma^2/(beta Xi^3) sinh(beta Xi) = (gamma/Xi)^2 sinh(x)/x, finite as x -> 0
        safe_x = np.where(x > 1e-8, x, 1.0)
        sinhc = np.where(x > 1e-8, sinh_s / safe_x, np.exp(-top) * np.ones_like(x))
        transverse = (gamma / xi) ** 2 * sinhc
    else:
        # classical spins: s^2 = 1 even where H vanishes
        direction = np.sign(h)
        longitudinal = np.ones_like(h)
        transverse = np.zeros_like(h)
    denom = cosh_s @ wv
    a = (direction * sinh_s) @ wv / denom
    b = (longitudinal * cosh_s + transverse) @ wv / denom
    return a, b


def rs_rhs(p: GlassParams, s: RSOrderParams, grid: QuadratureGrid | None = None) -> RSOrderParams:
    """Right-hand sides of the large-Q saddle-point equations for ``(m, xi, eta)``.

    ``H = J (sqrt(xi) u + sqrt(eta - xi) v) + J0 m`` and ``Xi = sqrt(H^2 + gamma^2)``.
    """
    grid = grid or gauss_hermite_grid()
    if grid.order < MIN_ORDER:
        raise DomainError(f"quadrature order must be >= {MIN_ORDER}")
    s.check()
    u = grid.nodes
    h = (p.J * (math.sqrt(s.xi) * u[:, None] + math.sqrt(s.eta - s.xi) * u[None, :])
         + p.J0 * s.m)
    a, b = _inner_ratios(h, p.gamma, p.beta, grid.weights)
    # with no field shift the m integrand is odd; keep m = 0 exact
    m_new = float(grid.integrate(a)) if p.J0 * s.m != 0.0 else 0.0
    xi_new = float(grid.integrate(a ** 2))
    eta_new = float(grid.integrate(b))
    return RSOrderParams(m_new, xi_new, eta_new)


@dataclass(frozen=True)
class RSSolution:
    state: RSOrderParams
    converged: bool
    iterations: int

    @property
    def near_critical(self) -> bool:
        return self.iterations > NEAR_CRITICAL_ITERATIONS


def solve_rs(p: GlassParams, init: RSOrderParams | None = None, damping: float = 0.5,
             tol: float = 1e-10, max_iter: int = 10_000,
             grid: QuadratureGrid | None = None) -> RSSolution:
    """Damped fixed-point iteration ``s <- (1 - d) s + d rhs(s)``.

    The default start is ordered (``m = 1``) when ``J0 != 0`` so a
    ferromagnetic branch is found when one exists. Converged when every component moves by
    less than ``tol``. Running out
    of iterations is reported through ``converged=False``, not raised.
    """
    if not 0 < damping <= 1:
        raise DomainError("damping must lie in (0, 1]")
    grid = grid or gauss_hermite_grid()
    state = init or RSOrderParams(m=1.0 if p.J0 != 0.0 else 0.0)
    state.check()
    cur = state.as_array()
    for it in range(1, max_iter + 1):
        rhs = rs_rhs(p, RSOrderParams(*cur), grid).as_array()
        nxt = (1.0 - damping) * cur + damping * rhs
        # keep the iterate inside the domain of the square roots
        nxt[1] = max(nxt[1], 0.0)
        nxt[2] = max(nxt[2], nxt[1])
        done = np.max(np.abs(nxt - cur)) < tol
        cur = nxt
        if done:
            return RSSolution(RSOrderParams(*cur), True, it)
    return RSSolution(RSOrderParams(*cur), False, max_iter)


def theta_phi_estimate(xi: float, eta: float, Q: float) -> tuple[float, float]:
    """Finite-Q size of the cross-component overlaps, ``(-xi/Q, -eta/Q)``."""
    if not Q >= 2:
        raise DomainError("Q must be >= 2")
    return -xi / Q, -eta / Q


# ------------------------------------------------------------ classical oracle

def _gauss_expect(fn) -> float:
    val, _ = integrate.quad(lambda z: fn(z) * math.exp(-0.5 * z * z), -np.inf, np.inf,
                            epsabs=1e-14, epsrel=1e-13, limit=200)
    return val / math.sqrt(2.0 * math.pi)


def _sk_overlap(beta_j: float, field: float) -> float:
    """Largest root of ``q = E[tanh^2(beta_j sqrt(q) z + field)]`` on ``[0, 1]``."""
    def rhs(q):
        a = beta_j * math.sqrt(q)
        return _gauss_expect(lambda z: math.tanh(a * z + field) ** 2)

    if field == 0.0:
        # q = 0 always solves; a positive root needs E[tanh^2]/q > 1 near zero
        if beta_j <= 1.0:
            return 0.0

        def ratio(q):
            a = beta_j * math.sqrt(q)
            return beta_j ** 2 * _gauss_expect(lambda z: (math.tanh(a * z) / a) ** 2) - 1.0

        lo = 1e-12
        if ratio(lo) <= 0.0:
            return 0.0
        return brentq(ratio, lo, 1.0, xtol=1e-15, rtol=1e-14)
    return brentq(lambda q: rhs(q) - q, 0.0, 1.0, xtol=1e-15, rtol=1e-14)


def classical_sk_oracle(betaJ: float, betaJ0: float, damping: float = 0.5,
                        tol: float = 1e-12, max_iter: int = 10_000) -> tuple[float, float]:
    """Classical RS SK solution ``(m, q)`` from one-dimensional Gaussian integrals.

    ``m`` is found by damped iteration of ``m = E[tanh(betaJ sqrt(q) z + betaJ0 m)]``;
    for each ``m`` the overlap is the largest root of its own equation, found
    by bracketing. Uses adaptive quadrature, not the Gauss-Hermite grid.
    """
    if not betaJ > 0:
        raise DomainError("betaJ must be positive")
    m = 1.0 if betaJ0 != 0.0 else 0.0
    q = _sk_overlap(betaJ, betaJ0 * m)
    for _ in range(max_iter):
        a = betaJ * math.sqrt(q)
        target = _gauss_expect(lambda z: math.tanh(a * z + betaJ0 * m))
        m_new = (1.0 - damping) * m + damping * target
        q_new = _sk_overlap(betaJ, betaJ0 * m_new)
        if abs(m_new - m) < tol and abs(q_new - q) < tol:
            return m_new, q_new
        m, q = m_new, q_new
    return m, q


# ------------------------------------------------------------ scans

def _scan_point(args) -> tuple[GlassParams, RSSolution]:
    p, init, kwargs = args
    order = kwargs.pop("order", DEFAULT_ORDER)
    return p, solve_rs(p, init, grid=gauss_hermite_grid(order), **kwargs)


def phase_scan(base: GlassParams, betas: Iterable[float], gammas: Iterable[float],
               init: RSOrderParams | None = None, threads: int = 1,
               **solver_kwargs) -> list[tuple[GlassParams, RSSolution]]:
    """Solve on the ``(beta, gamma)`` grid; rows sorted by ``(beta, gamma)``."""
    jobs = [(replace(base, beta=float(b), gamma=float(g)), init, dict(solver_kwargs))
            for b in sorted(betas) for g in sorted(gammas)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_scan_point, jobs))
    return [_scan_point(job) for job in jobs]


def write_scan_csv(rows: Iterable[tuple[GlassParams, RSSolution]], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SCAN_COLUMNS)
    for p, sol in rows:
        s = sol.state
        writer.writerow([f"{p.beta:.12g}", f"{p.gamma:.12g}", f"{p.J0:.12g}",
                         f"{s.m:.12g}", f"{s.xi:.12g}", f"{s.eta:.12g}",
                         str(sol.converged).lower(), sol.iterations])
