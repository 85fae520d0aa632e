"""Simulated annealing, half-hot repair and the iterative half-hot driver.

The driver runs ``log2(Q)`` rounds. Each round encodes the current reduced
problem with the half-hot penalty, asks an answer provider for a
configuration, repairs it to exactly ``Q'/2`` selected components per spin
and keeps those components for the next round.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Mapping, Protocol, Sequence

import numpy as np

from . import kernels
from .encoding import (BINARY, SPIN, PottsModel, QuadraticModel, decode_assignment,
                       encode_half_hot_ising, is_power_of_two, potts_energy)
from .errors import (DomainError, RepairBudgetExceeded, RoundFailure,
                     UnsupportedConfigurationError)

_SEED_MASK = (1 << 64) - 1


# ---------------------------------------------------------------- annealing

@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric temperature ladder, one temperature per sweep."""

    t_start: float
    t_end: float
    sweeps: int
    moves_per_sweep: int | None = None
    schedule_kind: str = "geometric"

    def __post_init__(self):
        if not (self.t_start >= self.t_end > 0):
            raise DomainError("need t_start >= t_end > 0")
        if self.sweeps < 1:
            raise DomainError("sweeps must be >= 1")
        if self.moves_per_sweep is not None and self.moves_per_sweep < 1:
            raise DomainError("moves_per_sweep must be >= 1")
        if self.schedule_kind != "geometric":
            raise UnsupportedConfigurationError("only geometric schedules are supported")

    def temperatures(self) -> np.ndarray:
        return np.geomspace(self.t_start, self.t_end, self.sweeps)


def default_schedule(qm: QuadraticModel) -> AnnealSchedule:
    """Scale-aware defaults derived from the magnitudes of the stored terms."""
    mags = np.abs(np.concatenate([qm.linear, qm.weights]))
    nonzero = mags[mags > 0]
    if len(nonzero) == 0:
        t_start, t_end = 1.0, 0.01
    else:
        t_start = 2.0 * float(nonzero.max())
        t_end = 0.01 * float(nonzero.min())
    sweeps = math.ceil(1000.0 * math.sqrt(max(qm.n_vars, 1)))
    return AnnealSchedule(t_start, t_end, sweeps)


@dataclass(frozen=True, eq=False)
class SAResult:
    best_config: np.ndarray
    best_energy: float
    seed: int
    energy_trace: np.ndarray | None = None

    def as_map(self, qm: QuadraticModel) -> dict[tuple[int, int], int]:
        """``(q, i) -> value`` view of the best configuration."""
        return {qm.key(k): int(v) for k, v in enumerate(self.best_config)}


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if seed < 0:
        raise DomainError("seed must be non-negative")
    return seed & _SEED_MASK


def simulated_anneal(qm: QuadraticModel, sched: AnnealSchedule | None = None, seed: int = 0,
                     *, init=None, backend: str | None = None) -> SAResult:
    """Single-flip Metropolis anneal; returns the best configuration seen.

    ``best_energy`` is recomputed from the stored terms, so it equals
    ``qm.energy(best_config)`` exactly.
    """
    if qm.n_vars == 0:
        raise DomainError("cannot anneal an empty model")
    sched = sched or default_schedule(qm)
    seed = _check_seed(seed)
    if init is not None:
        init = qm._check_config(init).astype(np.int64)
    indptr, indices, data = qm.csr()
    moves = sched.moves_per_sweep or qm.n_vars
    cfg, _, trace = kernels.anneal(qm.linear, indptr, indices, data, qm.domain == SPIN,
                                   sched.temperatures(), moves, seed, init, backend=backend)
    cfg = np.asarray(cfg, dtype=np.int8)
    cfg.setflags(write=False)
    trace = np.asarray(trace) + qm.offset
    return SAResult(cfg, qm.energy(cfg), seed, trace)


def exhaustive_minimum(qm: QuadraticModel, *, backend: str | None = None) -> tuple[np.ndarray, float]:
    """Global minimum over all ``2^n`` configurations of ``qm``."""
    h, w = qm.dense()
    cfg, _ = kernels.exhaustive_minimum(h, w, qm.domain == SPIN, backend=backend)
    cfg = np.asarray(cfg, dtype=np.int8)
    return cfg, qm.energy(cfg)


def potts_ground_state(model: PottsModel) -> tuple[np.ndarray, float]:
    """Brute force over all ``Q^N`` component assignments."""
    n, q = model.n_spins, model.n_components
    best, best_e = None, math.inf
    for assignment in itertools.product(range(q), repeat=n):
        e = potts_energy(model, assignment)
        if e < best_e:
            best, best_e = assignment, e
    return np.array(best, dtype=np.int64), best_e


def ising_ground_states(couplings: np.ndarray, tol: float = 1e-12) -> tuple[float, np.ndarray]:
    """Minimum of ``-sum_{i<j} K_ij s_i s_j`` and every configuration reaching it."""
    k = np.asarray(couplings, dtype=np.float64)
    n = k.shape[0]
    if n > 24:
        raise DomainError("brute-force Ising search limited to 24 spins")
    codes = np.arange(1 << n, dtype=np.int64)
    s = 1 - 2 * ((codes[:, None] >> np.arange(n)) & 1)
    energies = -0.5 * np.einsum("ci,ij,cj->c", s, k, s)
    e_min = float(energies.min())
    return e_min, s[energies <= e_min + tol].astype(np.int8)


# ---------------------------------------------------------------- repair

def _binary_view(config, domain: str) -> np.ndarray:
    v = np.asarray(config, dtype=np.int64).reshape(-1)
    if domain == SPIN:
        if not np.all(np.isin(v, (-1, 1))):
            raise DomainError("spin config values must be +-1")
        return (1 - v) // 2
    if not np.all(np.isin(v, (0, 1))):
        raise DomainError("binary config values must be 0/1")
    return v.copy()


def _repair(config, q: int, qm: QuadraticModel | None, domain: str,
            budget: int | None) -> tuple[np.ndarray, int]:
    if q % 2:
        raise UnsupportedConfigurationError(f"half-hot repair needs even Q, got {q}")
    x = _binary_view(config, domain)
    if len(x) % q:
        raise DomainError("config length must be a multiple of Q")
    if qm is not None:
        if qm.n_vars != len(x) or qm.n_components != q:
            raise DomainError("config does not match the quadratic model")
        bq = qm.to_binary()
        h, w = bq.dense()
        field_ = h + w @ x
    else:
        w = None
        field_ = np.zeros(len(x))
    target = q // 2
    flips = 0
    for i in range(len(x) // q):
        block = slice(i * q, (i + 1) * q)
        while True:
            count = int(x[block].sum())
            if count == target:
                break
            if budget is not None and flips >= budget:
                raise RepairBudgetExceeded(f"repair budget of {budget} flips exhausted at spin {i}")
            on = count > target
            local = np.flatnonzero(x[block] == (1 if on else 0))
            # energy change of 1 -> 0 is -field, of 0 -> 1 is +field
            cost = field_[i * q + local] * (-1.0 if on else 1.0)
            best = cost.min()
            ties = local[cost == best]
            # removing: drop the highest index; adding: take the lowest
            a = int(ties.max() if on else ties.min())
            k = i * q + a
            delta = -1 if on else 1
            x[k] += delta
            if w is not None:
                field_ += w[:, k] * delta
            flips += 1
    out = x if domain == BINARY else 1 - 2 * x
    return out.astype(np.int8), flips


def repair_half_hot(config, Q: int, qm: QuadraticModel | None = None, *,
                    domain: str | None = None, budget: int | None = None) -> np.ndarray:
    """Flip variables until every spin selects exactly ``Q/2`` components.

    Each flip is the one with the smallest energy increase under ``qm``
    (zero couplings when ``qm`` is omitted). Ties keep the lowest component
    indices selected. Feasible inputs come back unchanged.
    """
    domain = qm.domain if qm is not None else (domain or BINARY)
    return _repair(config, Q, qm, domain, budget)[0]


# ---------------------------------------------------------------- selection

@dataclass(frozen=True)
class SelectionState:
    """Surviving original components per spin after ``round`` half-hot rounds.

    ``sets[i]`` is sorted; local component ``a`` of the reduced problem for
    spin ``i`` is original component ``sets[i][a]``.
    """

    round: int
    sets: tuple[tuple[int, ...], ...]
    repair_flips: int = 0
    solver_energy: float | None = None

    def __post_init__(self):
        if self.round < 0:
            raise DomainError("round must be >= 0")
        sets = tuple(tuple(sorted(int(c) for c in s)) for s in self.sets)
        for s in sets:
            if len(set(s)) != len(s) or not s:
                raise DomainError("component sets must be non-empty and distinct")
        object.__setattr__(self, "sets", sets)

    @property
    def set_size(self) -> int:
        sizes = {len(s) for s in self.sets}
        if len(sizes) != 1:
            raise DomainError("component sets have unequal sizes")
        return sizes.pop()

    @property
    def index_map(self) -> np.ndarray:
        return np.array(self.sets, dtype=np.int64)

    def to_dict(self) -> dict:
        return {"round": self.round, "sets": [list(s) for s in self.sets],
                "repair_flips": self.repair_flips, "solver_energy": self.solver_energy}


def initial_selection(model: PottsModel) -> SelectionState:
    return SelectionState(0, tuple(tuple(range(model.n_components)) for _ in range(model.n_spins)))


def reduce_problem(model: PottsModel, sel: SelectionState) -> tuple[PottsModel, SelectionState]:
    """Restrict ``model`` to the surviving components of ``sel``.

    Spins ``i`` and ``j`` interact on reduced components ``(a, b)`` exactly
    when ``sets[i][a] == sets[j][b]``: identical sets keep the full pattern,
    disjoint sets decouple, partial overlaps keep only shared components.
    """
    if len(sel.sets) != model.n_spins:
        raise DomainError("selection does not cover every spin")
    size = sel.set_size
    if size < 2 or size % 2:
        raise DomainError(f"reduced problems need an even set size >= 2, got {size}")
    for i, s in enumerate(sel.sets):
        if not set(s) <= set(model.labels[i].tolist()):
            raise DomainError(f"selection for spin {i} names unknown components")
    reduced = PottsModel(model.couplings, size, model.scale_convention,
                         labels=sel.index_map, self_coupling=model.self_coupling)
    return reduced, sel


# ---------------------------------------------------------------- QUBO files

def qubo_to_dict(qm: QuadraticModel) -> dict:
    b = qm.to_binary()
    return {
        "num_vars": b.n_vars,
        "offset": b.offset,
        "linear": [[k, float(h)] for k, h in enumerate(b.linear) if h != 0.0],
        "quadratic": [[int(r), int(c), float(w)] for r, c, w in zip(b.rows, b.cols, b.weights)],
        "var_names": [f"{q}:{i}" for q, i in map(b.key, range(b.n_vars))],
    }


def qubo_from_dict(data: Mapping) -> QuadraticModel:
    n_vars = int(data["num_vars"])
    names = data.get("var_names")
    if names:
        keys = [tuple(int(p) for p in name.split(":")) for name in names]
        n_comp = max(q for q, _ in keys) + 1
        n_spins = max(i for _, i in keys) + 1
        if n_comp * n_spins != n_vars:
            raise DomainError("var_names do not form a full (component, spin) grid")
    else:
        n_comp, n_spins = 1, n_vars
    lin = np.zeros(n_vars)
    for k, h in data.get("linear", []):
        lin[int(k)] += float(h)
    pairs: dict[tuple[int, int], float] = {}
    for k, l, w in data.get("quadratic", []):
        k, l = int(k), int(l)
        if k == l:
            raise DomainError("QUBO self-pairs are not allowed")
        key = (min(k, l), max(k, l))
        pairs[key] = pairs.get(key, 0.0) + float(w)
    keys = sorted(pairs)
    return QuadraticModel(n_spins, n_comp, BINARY, lin,
                          [k[0] for k in keys], [k[1] for k in keys],
                          [pairs[k] for k in keys], float(data.get("offset", 0.0)))


def export_qubo(qm: QuadraticModel, path) -> Path:
    """Write ``qm`` as a binary QUBO; spin models are converted with offset."""
    path = Path(path)
    path.write_text(json.dumps(qubo_to_dict(qm), indent=1))
    return path


def import_qubo(path) -> QuadraticModel:
    return qubo_from_dict(json.loads(Path(path).read_text()))


def write_answer(config, path) -> Path:
    """Answer file ``{"config": [[k, 0|1], ...]}`` for a binary configuration."""
    path = Path(path)
    path.write_text(json.dumps({"config": [[k, int(v)] for k, v in enumerate(np.asarray(config))]}))
    return path


def read_answer(path, n_vars: int) -> np.ndarray:
    """Binary configuration from an answer file; raises ``DomainError`` if malformed."""
    try:
        data = json.loads(Path(path).read_text())
        entries = data["config"]
        x = np.full(n_vars, -1, dtype=np.int64)
        for k, v in entries:
            k, v = int(k), int(v)
            if not 0 <= k < n_vars or v not in (0, 1):
                raise DomainError(f"bad answer entry [{k}, {v}]")
            x[k] = v
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"malformed answer file {path}: {exc}") from exc
    if np.any(x < 0):
        raise DomainError(f"answer file {path} does not cover all {n_vars} variables")
    return x.astype(np.int8)


# ---------------------------------------------------------------- driver

class AnswerProvider(Protocol):
    def __call__(self, qm: QuadraticModel, round_index: int) -> np.ndarray:
        """Configuration of ``qm`` in its own domain."""


@dataclass
class SASolver:
    """Answer provider backed by :func:`simulated_anneal`."""

    schedule: AnnealSchedule | None = None
    seed: int = 0
    backend: str | None = None

    def round_seed(self, round_index: int) -> int:
        return int(np.random.SeedSequence([self.seed, round_index]).generate_state(1, np.uint64)[0])

    def __call__(self, qm: QuadraticModel, round_index: int) -> np.ndarray:
        sched = self.schedule or default_schedule(qm)
        return simulated_anneal(qm, sched, self.round_seed(round_index),
                                backend=self.backend).best_config


@dataclass
class FileSolver:
    """Answer provider for external machines.

    Each round's problem is exported to ``workdir/round_<r>.qubo.json`` and
    the binary answer is read from ``answers[r]``. A missing entry falls back
    to ``fallback`` when given.
    """

    workdir: Path
    answers: Mapping[int, Path] = field(default_factory=dict)
    fallback: AnswerProvider | None = None

    def __call__(self, qm: QuadraticModel, round_index: int) -> np.ndarray:
        Path(self.workdir).mkdir(parents=True, exist_ok=True)
        export_qubo(qm, Path(self.workdir) / f"round_{round_index}.qubo.json")
        if round_index not in self.answers:
            if self.fallback is None:
                raise RoundFailure(round_index, "no answer file supplied")
            return self.fallback(qm, round_index)
        try:
            x = read_answer(self.answers[round_index], qm.n_vars)
        except (DomainError, OSError) as exc:
            raise RoundFailure(round_index, str(exc)) from exc
        return x if qm.domain == BINARY else (1 - 2 * x).astype(np.int8)


@dataclass(frozen=True, eq=False)
class IterationResult:
    assignment: np.ndarray
    energy: float
    history: tuple[SelectionState, ...]

    def __iter__(self) -> Iterator:
        return iter((self.assignment, self.energy, self.history))

    @property
    def rounds(self) -> int:
        return len(self.history) - 1


def iterate_half_hot(model: PottsModel, lam: float = 1.0, sched: AnnealSchedule | None = None,
                     seed: int = 0, solver: AnswerProvider | Callable | None = None, *,
                     repair_budget: int | None = None) -> IterationResult:
    """Shrink every spin's component set by half per round until one remains.

    ``history[0]`` is the full selection and ``history[r]`` the selection
    after round ``r``. The returned energy is the Potts energy of the final
    assignment under ``model``.
    """
    q = model.n_components
    if not is_power_of_two(q):
        raise UnsupportedConfigurationError(f"Q must be a power of two, got {q}")
    solver = solver or SASolver(sched, seed)
    sel = initial_selection(model)
    history = [sel]
    for r in range(int(math.log2(q))):
        reduced = model if r == 0 else reduce_problem(model, sel)[0]
        qm = encode_half_hot_ising(reduced, lam)
        raw = np.asarray(solver(qm, r))
        try:
            cfg, flips = _repair(raw, qm.n_components, qm, qm.domain, repair_budget)
        except (DomainError, RepairBudgetExceeded) as exc:
            raise RoundFailure(r, str(exc)) from exc
        decoded = decode_assignment(qm, cfg)
        if not decoded.feasible:
            raise RoundFailure(r, f"infeasible spins {list(decoded.violations)} after repair")
        index_map = sel.index_map
        sets = tuple(tuple(int(index_map[i, a]) for a in sorted(chosen))
                     for i, chosen in enumerate(decoded.sets))
        sel = SelectionState(r + 1, sets, flips, qm.energy(cfg))
        history.append(sel)
    assignment = np.array([s[0] for s in sel.sets], dtype=np.int64)
    return IterationResult(assignment, potts_energy(model, assignment), tuple(history))


def potts_brute_force_energies(model: PottsModel) -> np.ndarray:
    """Energies of all ``Q^N`` assignments in lexicographic order."""
    return np.array([potts_energy(model, a)
                     for a in itertools.product(range(model.n_components), repeat=model.n_spins)])


def hit_rate(energies: Sequence[float], target: float, tol: float = 1e-9) -> float:
    e = np.asarray(energies, dtype=np.float64)
    return float(np.mean(np.abs(e - target) <= tol * max(1.0, abs(target))))
