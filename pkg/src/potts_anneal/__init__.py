"""Potts-model encodings, mean-field transition analysis, replica-symmetric
glass equations and iterative half-hot annealing."""
from __future__ import annotations

__version__ = "0.1.0"

from .annealer import (AnnealSchedule, IterationResult, SAResult, SASolver, SelectionState,
                       default_schedule, exhaustive_minimum, export_qubo, import_qubo,
                       iterate_half_hot, reduce_problem, repair_half_hot, simulated_anneal)
from .encoding import (ComponentAssignment, PottsModel, QuadraticModel, decode_assignment,
                       encode_half_hot_ising, encode_one_hot, encode_one_hot_ising, ferromagnet,
                       potts_energy)
from .errors import (CapacityError, DomainError, RepairBudgetExceeded, RoundFailure,
                     UnsupportedConfigurationError)
from .kernels import BACKEND
from .meanfield import (MeanFieldParams, OrderPoint, SweepResult, build_effective_hamiltonian,
                        free_energy, ground_energy, minimize_free_energy, solve_infinite_q,
                        sweep_gamma)
from .replica import (GlassParams, QuadratureGrid, RSOrderParams, classical_sk_oracle,
                      gauss_hermite_grid, rs_rhs, solve_rs, theta_phi_estimate)

__all__ = [
    "AnnealSchedule", "BACKEND", "CapacityError", "ComponentAssignment", "DomainError",
    "GlassParams", "IterationResult", "MeanFieldParams", "OrderPoint", "PottsModel",
    "QuadraticModel", "QuadratureGrid", "RSOrderParams", "RepairBudgetExceeded", "RoundFailure",
    "SAResult", "SASolver", "SelectionState", "SweepResult", "UnsupportedConfigurationError",
    "build_effective_hamiltonian", "classical_sk_oracle", "decode_assignment",
    "default_schedule", "encode_half_hot_ising", "encode_one_hot", "encode_one_hot_ising",
    "exhaustive_minimum", "export_qubo", "ferromagnet", "free_energy", "gauss_hermite_grid",
    "ground_energy", "import_qubo", "iterate_half_hot", "minimize_free_energy", "potts_energy",
    "reduce_problem", "repair_half_hot", "rs_rhs", "simulated_anneal", "solve_infinite_q",
    "solve_rs", "sweep_gamma", "theta_phi_estimate",
]
