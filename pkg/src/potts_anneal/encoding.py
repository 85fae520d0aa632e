"""Potts instances and their quadratic (Ising / binary) encodings.

Variables of an encoded model are laid out spin-major: component ``q`` of
Potts spin ``i`` is flat index ``i * Q + q``. Components and spins are
0-based throughout.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, UnsupportedConfigurationError

BINARY = "binary"
SPIN = "spin"
DOMAINS = (BINARY, SPIN)
CONSTRAINT_MODES = ("one_hot", "half_hot", "none")


@dataclass(frozen=True, eq=False)
class PottsModel:
    """``N`` Potts spins with ``Q`` components and symmetric couplings.

    ``labels[i, a]`` names the component that local component ``a`` of spin
    ``i`` stands for; two spins interact through ``J_ij`` when their chosen
    labels agree. The default labels (``arange(Q)`` for every spin) give the
    ordinary Potts model. Reduced problems produced between half-hot rounds
    carry non-trivial labels.

    ``self_coupling`` is a diagonal ``J_ii`` that only shifts energies by a
    constant; it exists so the ``(J/2N)(sum_i s_i)^2`` form of the fully
    connected ferromagnet can be represented exactly.
    """

    couplings: np.ndarray
    n_components: int
    scale_convention: bool = True
    labels: np.ndarray | None = None
    self_coupling: float = 0.0

    def __post_init__(self):
        j = np.array(self.couplings, dtype=np.float64)
        if j.ndim != 2 or j.shape[0] != j.shape[1]:
            raise DomainError("couplings must be a square matrix")
        if j.shape[0] < 2:
            raise DomainError("need at least two Potts spins")
        if self.n_components < 2:
            raise DomainError("need at least two components")
        if not np.array_equal(j, j.T):
            raise DomainError("couplings must be symmetric")
        if np.any(np.diag(j) != 0.0):
            raise DomainError("couplings must have a zero diagonal")
        j.setflags(write=False)
        object.__setattr__(self, "couplings", j)
        if self.labels is None:
            lab = np.tile(np.arange(self.n_components), (j.shape[0], 1))
        else:
            lab = np.array(self.labels, dtype=np.int64)
            if lab.shape != (j.shape[0], self.n_components):
                raise DomainError("labels must have shape (n_spins, n_components)")
            for row in lab:
                if len(set(row.tolist())) != len(row):
                    raise DomainError("labels of one spin must be distinct")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    @property
    def n_spins(self) -> int:
        return self.couplings.shape[0]

    @property
    def prefactor(self) -> float:
        """Coefficient in front of the Kronecker-delta sum (4/N or 1)."""
        return 4.0 / self.n_spins if self.scale_convention else 1.0

    def edges(self) -> Iterable[tuple[int, int, float]]:
        rows, cols = np.nonzero(np.triu(self.couplings, k=1))
        for i, j in zip(rows.tolist(), cols.tolist()):
            yield i, j, float(self.couplings[i, j])

    def interaction_pairs(self, i: int, j: int) -> list[tuple[int, int]]:
        """Local component pairs ``(a, b)`` through which spins i and j interact."""
        li, lj = self.labels[i], self.labels[j]
        return [(a, b) for a in range(len(li)) for b in range(len(lj)) if li[a] == lj[b]]


def ferromagnet(n_spins: int, n_components: int, j: float = 1.0, *,
                square_form: bool = False, scale_convention: bool = True) -> PottsModel:
    """Fully connected ferromagnet with uniform coupling ``j``.

    ``square_form`` adds the ``i == j`` terms of ``(J/2N)(sum_i s_qi)^2``.
    """
    couplings = np.full((n_spins, n_spins), float(j))
    np.fill_diagonal(couplings, 0.0)
    return PottsModel(couplings, n_components, scale_convention,
                      self_coupling=float(j) if square_form else 0.0)


def potts_energy(model: PottsModel, assignment: Sequence[int]) -> float:
    """Energy ``-c sum_{i<j} J_ij delta(S_i, S_j)`` of a component assignment."""
    s = np.asarray(assignment)
    if s.shape != (model.n_spins,):
        raise DomainError(f"assignment must have {model.n_spins} entries")
    if not np.issubdtype(s.dtype, np.integer):
        if not np.all(np.mod(s, 1) == 0):
            raise DomainError("components must be integers")
        s = s.astype(np.int64)
    if np.any(s < 0) or np.any(s >= model.n_components):
        raise DomainError(f"components must lie in 0..{model.n_components - 1}")
    chosen = model.labels[np.arange(model.n_spins), s]
    same = chosen[:, None] == chosen[None, :]
    total = float(np.sum(np.triu(model.couplings * same, k=1)))
    c = model.prefactor
    return -c * total - 0.5 * c * model.n_spins * model.self_coupling


@dataclass(frozen=True, eq=False)
class QuadraticModel:
    """Quadratic form over binary (0/1) or spin (+-1) variables.

    ``energy(v) = sum_k linear[k] v_k + sum_m weights[m] v_rows[m] v_cols[m] + offset``
    with ``rows < cols`` and each pair stored once.
    """

    n_spins: int
    n_components: int
    domain: str
    linear: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    offset: float = 0.0
    constraint_mode: str = "none"
    penalty_lambda: float = 0.0
    _dense: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise DomainError(f"domain must be one of {DOMAINS}")
        if self.constraint_mode not in CONSTRAINT_MODES:
            raise DomainError(f"constraint_mode must be one of {CONSTRAINT_MODES}")
        n = self.n_spins * self.n_components
        lin = np.array(self.linear, dtype=np.float64).reshape(n)
        rows = np.array(self.rows, dtype=np.int64).reshape(-1)
        cols = np.array(self.cols, dtype=np.int64).reshape(-1)
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        if not (len(rows) == len(cols) == len(w)):
            raise DomainError("rows, cols and weights must have equal length")
        if np.any(rows >= cols):
            raise DomainError("quadratic keys must satisfy row < col")
        if len(rows) and (rows.min() < 0 or cols.max() >= n):
            raise DomainError("quadratic key out of range")
        if len(np.unique(rows * max(n, 1) + cols)) != len(rows):
            raise DomainError("duplicate quadratic key")
        for arr in (lin, rows, cols, w):
            arr.setflags(write=False)
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def n_vars(self) -> int:
        return self.n_spins * self.n_components

    def index(self, q: int, i: int) -> int:
        return i * self.n_components + q

    def key(self, k: int) -> tuple[int, int]:
        """``(q, i)`` of flat variable ``k``."""
        i, q = divmod(k, self.n_components)
        return q, i

    @property
    def linear_terms(self) -> dict[tuple[int, int], float]:
        return {self.key(k): float(h) for k, h in enumerate(self.linear) if h != 0.0}

    @property
    def quadratic_terms(self) -> dict[tuple[tuple[int, int], tuple[int, int]], float]:
        return {(self.key(int(r)), self.key(int(c))): float(w)
                for r, c, w in zip(self.rows, self.cols, self.weights)}

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        """``(h, W)`` with ``W`` symmetric and zero on the diagonal."""
        if "hw" not in self._dense:
            w = np.zeros((self.n_vars, self.n_vars))
            w[self.rows, self.cols] = self.weights
            w[self.cols, self.rows] = self.weights
            self._dense["hw"] = (self.linear, w)
        return self._dense["hw"]

    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric adjacency in CSR form ``(indptr, indices, data)``."""
        if "csr" not in self._dense:
            src = np.concatenate([self.rows, self.cols])
            dst = np.concatenate([self.cols, self.rows])
            val = np.concatenate([self.weights, self.weights])
            order = np.lexsort((dst, src))
            src, dst, val = src[order], dst[order], val[order]
            indptr = np.zeros(self.n_vars + 1, dtype=np.int64)
            np.add.at(indptr, src + 1, 1)
            self._dense["csr"] = (np.cumsum(indptr), dst, val)
        return self._dense["csr"]

    def _check_config(self, config) -> np.ndarray:
        v = np.asarray(config).reshape(-1)
        if v.shape != (self.n_vars,):
            raise DomainError(f"config must cover all {self.n_vars} variables")
        allowed = (0, 1) if self.domain == BINARY else (-1, 1)
        if not np.all(np.isin(v, allowed)):
            raise DomainError(f"{self.domain} config values must be in {allowed}")
        return v.astype(np.float64)

    def energy(self, config) -> float:
        v = self._check_config(config)
        quad = float(np.dot(self.weights, v[self.rows] * v[self.cols]))
        return float(np.dot(self.linear, v)) + quad + self.offset

    def energies(self, configs) -> np.ndarray:
        """Energies of a batch of configurations (one per row)."""
        v = np.asarray(configs, dtype=np.float64).reshape(-1, self.n_vars)
        return v @ self.linear + (v[:, self.rows] * v[:, self.cols]) @ self.weights + self.offset

    def _replace_terms(self, domain, linear, weights, offset) -> QuadraticModel:
        return QuadraticModel(self.n_spins, self.n_components, domain, linear,
                              self.rows, self.cols, weights, offset,
                              self.constraint_mode, self.penalty_lambda)

    def to_binary(self) -> QuadraticModel:
        """Same energies over ``x = (1 - s)/2``."""
        if self.domain == BINARY:
            return self
        # s = 1 - 2x
        lin = -2.0 * self.linear
        np.add.at(lin, self.rows, -2.0 * self.weights)
        np.add.at(lin, self.cols, -2.0 * self.weights)
        offset = self.offset + float(self.linear.sum()) + float(self.weights.sum())
        return self._replace_terms(BINARY, lin, 4.0 * self.weights, offset)

    def to_spin(self) -> QuadraticModel:
        """Same energies over ``s = 1 - 2x``."""
        if self.domain == SPIN:
            return self
        # x = (1 - s)/2
        lin = -0.5 * self.linear
        np.add.at(lin, self.rows, -0.25 * self.weights)
        np.add.at(lin, self.cols, -0.25 * self.weights)
        offset = self.offset + 0.5 * float(self.linear.sum()) + 0.25 * float(self.weights.sum())
        return self._replace_terms(SPIN, lin, 0.25 * self.weights, offset)

    def to_domain(self, domain: str) -> QuadraticModel:
        return self.to_binary() if domain == BINARY else self.to_spin()


class _Terms:
    """Accumulates linear, pairwise and constant contributions."""

    def __init__(self, n_spins: int, n_components: int):
        self.n_spins = n_spins
        self.n_components = n_components
        self.linear = np.zeros(n_spins * n_components)
        self.pairs: dict[tuple[int, int], float] = {}
        self.offset = 0.0

    def add_pair(self, k: int, l: int, w: float) -> None:
        if k == l:
            raise DomainError("self-pairs are not allowed")
        key = (k, l) if k < l else (l, k)
        self.pairs[key] = self.pairs.get(key, 0.0) + w

    def build(self, domain: str, mode: str, lam: float) -> QuadraticModel:
        keys = sorted(k for k, w in self.pairs.items() if w != 0.0)
        rows = np.array([k[0] for k in keys], dtype=np.int64)
        cols = np.array([k[1] for k in keys], dtype=np.int64)
        weights = np.array([self.pairs[k] for k in keys], dtype=np.float64)
        return QuadraticModel(self.n_spins, self.n_components, domain, self.linear,
                              rows, cols, weights, self.offset, mode, lam)


def _coupling_terms(model: PottsModel, scale: float) -> _Terms:
    terms = _Terms(model.n_spins, model.n_components)
    q = model.n_components
    for i, j, jij in model.edges():
        for a, b in model.interaction_pairs(i, j):
            terms.add_pair(i * q + a, j * q + b, -scale * jij)
    return terms


def _add_intra_pairs(terms: _Terms, w: float) -> None:
    q = terms.n_components
    for i in range(terms.n_spins):
        for a in range(q):
            for b in range(a + 1, q):
                terms.add_pair(i * q + a, i * q + b, w)


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not lam >= 0.0:
        raise DomainError("penalty lambda must be >= 0")
    return lam


def encode_one_hot(model: PottsModel, lam: float = 1.0) -> QuadraticModel:
    """Binary one-hot form: ``-c sum J_ij sum_q x_qi x_qj + (2 lam/Q) sum_i (sum_q x_qi - 1)^2``."""
    lam = _check_lambda(lam)
    c = model.prefactor
    q = model.n_components
    terms = _coupling_terms(model, c)
    p = 2.0 * lam / q
    # (sum x - 1)^2 = -sum x + 2 sum_{a<b} x_a x_b + 1 on binary variables
    terms.linear -= p
    _add_intra_pairs(terms, 2.0 * p)
    terms.offset = p * model.n_spins - 0.5 * c * model.n_spins * model.self_coupling
    return terms.build(BINARY, "one_hot", lam)


def encode_one_hot_ising(model: PottsModel, lam: float = 1.0) -> QuadraticModel:
    """Spin one-hot form: couplings ``-(c/4) J_ij s_qi s_qj`` and the one-hot
    penalty rewritten through ``x = (1 - s)/2``."""
    lam = _check_lambda(lam)
    c = model.prefactor
    q = model.n_components
    n = model.n_spins
    terms = _coupling_terms(model, c / 4.0)
    # (lam/2Q)[(sum s)^2 - 2(Q-2) sum s + (Q-2)^2], (sum s)^2 = Q + 2 sum_{a<b} s_a s_b
    terms.linear -= lam * (q - 2) / q
    _add_intra_pairs(terms, lam / q)
    terms.offset = (n * lam * (q + (q - 2) ** 2) / (2.0 * q)
                    - c * n * q * model.self_coupling / 8.0)
    return terms.build(SPIN, "one_hot", lam)


def encode_half_hot_ising(model: PottsModel, lam: float = 1.0) -> QuadraticModel:
    """Spin half-hot form: couplings ``-(c/4) J_ij s_qi s_qj`` plus
    ``(lam/2Q) sum_i (sum_q s_qi)^2``. No linear terms are produced."""
    lam = _check_lambda(lam)
    q = model.n_components
    if q % 2:
        raise UnsupportedConfigurationError(
            f"half-hot encoding needs an even number of components, got {q}")
    c = model.prefactor
    n = model.n_spins
    terms = _coupling_terms(model, c / 4.0)
    _add_intra_pairs(terms, lam / q)
    terms.offset = n * lam / 2.0 - c * n * q * model.self_coupling / 8.0
    return terms.build(SPIN, "half_hot", lam)


ENCODERS = {
    "one_hot": encode_one_hot,
    "one_hot_ising": encode_one_hot_ising,
    "half_hot_ising": encode_half_hot_ising,
}


@dataclass(frozen=True)
class ComponentAssignment:
    """Selected component sets per spin, with a feasibility verdict."""

    sets: tuple[frozenset[int], ...]
    feasible: bool
    violations: tuple[int, ...] = ()

    def components(self) -> np.ndarray:
        """Single selected component per spin; requires ``|A_i| = 1``."""
        if any(len(a) != 1 for a in self.sets):
            raise DomainError("assignment does not select exactly one component per spin")
        return np.array([next(iter(a)) for a in self.sets], dtype=np.int64)


def decode_assignment(qm: QuadraticModel, config) -> ComponentAssignment:
    """Read the selected components ``{q : x_qi = 1}`` of each spin.

    Infeasible configurations are reported, never repaired.
    """
    v = np.asarray(config).reshape(-1)
    if v.shape != (qm.n_vars,):
        raise DomainError(f"config must cover all {qm.n_vars} variables")
    if qm.domain == SPIN:
        if not np.all(np.isin(v, (-1, 1))):
            raise DomainError("spin config values must be +-1")
        x = (1 - v) // 2
    else:
        if not np.all(np.isin(v, (0, 1))):
            raise DomainError("binary config values must be 0/1")
        x = v
    block = np.asarray(x, dtype=np.int64).reshape(qm.n_spins, qm.n_components)
    sets = tuple(frozenset(np.flatnonzero(row).tolist()) for row in block)
    counts = block.sum(axis=1)
    if qm.constraint_mode == "one_hot":
        bad = np.flatnonzero(counts != 1)
    elif qm.constraint_mode == "half_hot":
        bad = np.flatnonzero(counts != qm.n_components // 2)
    else:
        bad = np.zeros(0, dtype=np.int64)
    return ComponentAssignment(sets, len(bad) == 0, tuple(bad.tolist()))


def one_hot_config(model: PottsModel, assignment: Sequence[int], domain: str = BINARY) -> np.ndarray:
    """Flat one-hot configuration selecting ``assignment[i]`` for spin ``i``."""
    x = np.zeros((model.n_spins, model.n_components), dtype=np.int8)
    x[np.arange(model.n_spins), np.asarray(assignment)] = 1
    x = x.reshape(-1)
    return x if domain == BINARY else (1 - 2 * x).astype(np.int8)


# ---------------------------------------------------------------- file formats

def instance_to_dict(model: PottsModel) -> dict:
    return {
        "n_spins": model.n_spins,
        "n_components": model.n_components,
        "couplings": [[i, j, w] for i, j, w in model.edges()],
        "scale_convention": model.scale_convention,
    }


def instance_from_dict(data: Mapping) -> PottsModel:
    n = int(data["n_spins"])
    q = int(data["n_components"])
    j = np.zeros((n, n))
    for entry in data.get("couplings", []):
        a, b, w = int(entry[0]), int(entry[1]), float(entry[2])
        if a == b:
            raise DomainError("self-couplings are not allowed in instance files")
        if not (0 <= a < n and 0 <= b < n):
            raise DomainError(f"coupling ({a}, {b}) out of range")
        j[a, b] = j[b, a] = w
    return PottsModel(j, q, bool(data.get("scale_convention", True)))


def load_instance(path) -> PottsModel:
    return instance_from_dict(json.loads(Path(path).read_text()))


def save_instance(model: PottsModel, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(model), indent=1))


def quadratic_model_to_dict(qm: QuadraticModel) -> dict:
    lin = [[q, i, h] for (q, i), h in qm.linear_terms.items()]
    quad = [[a[0], a[1], b[0], b[1], w] for (a, b), w in qm.quadratic_terms.items()]
    return {
        "domain": qm.domain,
        "constraint_mode": qm.constraint_mode,
        "lambda": qm.penalty_lambda,
        "offset": qm.offset,
        "n_spins": qm.n_spins,
        "n_components": qm.n_components,
        "linear": lin,
        "quadratic": quad,
    }


def quadratic_model_from_dict(data: Mapping) -> QuadraticModel:
    lin_entries = data.get("linear", [])
    quad_entries = data.get("quadratic", [])
    n = data.get("n_spins")
    q = data.get("n_components")
    if n is None or q is None:
        qs = [e[0] for e in lin_entries] + [e[0] for e in quad_entries] + [e[2] for e in quad_entries]
        spins = [e[1] for e in lin_entries] + [e[1] for e in quad_entries] + [e[3] for e in quad_entries]
        q = max(qs, default=-1) + 1 if q is None else q
        n = max(spins, default=-1) + 1 if n is None else n
    n, q = int(n), int(q)
    terms = _Terms(n, q)
    for qq, i, h in lin_entries:
        terms.linear[int(i) * q + int(qq)] += float(h)
    for qa, i, qb, j, w in quad_entries:
        terms.add_pair(int(i) * q + int(qa), int(j) * q + int(qb), float(w))
    terms.offset = float(data.get("offset", 0.0))
    lam = float(data.get("lambda", 0.0))
    return terms.build(data.get("domain", BINARY), data.get("constraint_mode", "none"), lam)


def save_quadratic_model(qm: QuadraticModel, path) -> None:
    Path(path).write_text(json.dumps(quadratic_model_to_dict(qm), indent=1))


def load_quadratic_model(path) -> QuadraticModel:
    return quadratic_model_from_dict(json.loads(Path(path).read_text()))


def is_power_of_two(q: int) -> bool:
    return q >= 1 and (q & (q - 1)) == 0
