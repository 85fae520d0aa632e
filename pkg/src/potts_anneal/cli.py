"""Command-line front end.

Every artifact is written atomically and accompanied by
``<artifact>.manifest.json`` recording the exact arguments, so re-running
``potts-anneal <manifest argv>`` reproduces it byte for byte.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, annealer, encoding, meanfield, replica
from .errors import CapacityError, DomainError, RoundFailure, UnsupportedConfigurationError

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
THREADS_ENV = "POTTS_ANNEAL_THREADS"

_RUNTIME_ERRORS = (DomainError, UnsupportedConfigurationError, CapacityError, RoundFailure,
                   OSError, ValueError, KeyError, json.JSONDecodeError)


@dataclass
class RunManifest:
    command: str
    parameters: dict
    seed: int
    output_paths: list[str] = field(default_factory=list)
    tool_version: str = __version__
    argv: list[str] = field(default_factory=list)
    results: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(_finite(self.__dict__), indent=1, sort_keys=True,
                          default=_json_default, allow_nan=False)


def _finite(obj):
    """Replace non-finite floats by strings so the manifest stays strict JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _json_default(obj):
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


class _Outputs:
    """Collects artifacts in memory and commits them only on success."""

    def __init__(self):
        self.files: dict[Path, str] = {}

    def add(self, path, text: str) -> None:
        self.files[Path(path)] = text

    def commit(self, manifest: RunManifest) -> None:
        manifest.output_paths = [str(p) for p in self.files]
        for path, text in self.files.items():
            _atomic_write(path, text)
        for path in self.files:
            _atomic_write(path.with_name(path.name + ".manifest.json"), manifest.to_json())


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _grid(values: list[float] | None, vmax: float | None, step: float | None,
          vmin: float = 0.0) -> list[float]:
    if values:
        return sorted(values)
    if vmax is None or step is None:
        raise DomainError("give explicit values or both a maximum and a step")
    if step <= 0:
        raise DomainError("step must be positive")
    n = int(round((vmax - vmin) / step))
    return [vmin + k * step for k in range(n + 1)]


def _emit_csv(out: _Outputs, path: str | None, text: str, stdout) -> None:
    if path:
        out.add(path, text)
    else:
        stdout.write(text)


# ---------------------------------------------------------------- commands

def _cmd_encode(args, out: _Outputs, stdout) -> dict:
    model = encoding.load_instance(args.instance)
    qm = encoding.ENCODERS[args.encoding](model, args.lam)
    text = json.dumps(encoding.quadratic_model_to_dict(qm), indent=1)
    if args.out:
        out.add(args.out, text)
    else:
        stdout.write(text + "\n")
    if args.qubo:
        out.add(args.qubo, json.dumps(annealer.qubo_to_dict(qm), indent=1))
    return {"n_vars": qm.n_vars, "offset": qm.offset}


def _cmd_meanfield(args, out: _Outputs, stdout) -> dict:
    p = meanfield.MeanFieldParams(J=args.J, lam=args.lam, Q=args.Q, constraint=args.constraint,
                                  beta=args.beta)
    res = meanfield.sweep_gamma(p, args.gamma_max, args.gamma_step, threads=args.threads)
    _emit_csv(out, args.out, meanfield.sweep_csv(res), stdout)
    summary = {"classification": res.classification, "max_jump": res.max_jump,
               "gamma_star": res.gamma_star}
    print(f"classification={res.classification} max_jump={res.max_jump:.6g} "
          f"gamma_star={res.gamma_star}", file=stdout if args.out else sys.stderr)
    return summary


def _cmd_infq(args, out: _Outputs, stdout) -> dict:
    gammas = _grid(args.gamma, args.gamma_max, args.gamma_step)
    buf = io.StringIO()
    buf.write("gamma,m\n")
    for g in gammas:
        m = meanfield.solve_infinite_q(args.J, g, args.beta)
        buf.write(f"{g:.12g},{m:.12g}\n")
    _emit_csv(out, args.out, buf.getvalue(), stdout)
    return {"points": len(gammas)}


def _cmd_replica(args, out: _Outputs, stdout) -> dict:
    betas = _grid(args.beta, args.beta_max, args.beta_step, args.beta_step or 0.0)
    gammas = _grid(args.gamma, args.gamma_max, args.gamma_step)
    q = math.inf if args.Q in ("inf", "infinity") else int(args.Q)
    base = replica.GlassParams(J=args.J, J0=args.J0, lam=args.lam, gamma=gammas[0],
                               beta=betas[0], Q=q)
    rows = replica.phase_scan(base, betas, gammas, threads=args.threads, damping=args.damping,
                              tol=args.tol, max_iter=args.max_iter, order=args.order)
    buf = io.StringIO()
    replica.write_scan_csv(rows, buf)
    _emit_csv(out, args.out, buf.getvalue(), stdout)
    flagged = [{"beta": p.beta, "gamma": p.gamma, "iterations": s.iterations}
               for p, s in rows if s.near_critical]
    for entry in flagged:
        print(f"near-critical: beta={entry['beta']:.12g} gamma={entry['gamma']:.12g} "
              f"iterations={entry['iterations']}", file=sys.stderr)
    return {"near_critical": flagged,
            "unconverged": [[p.beta, p.gamma] for p, s in rows if not s.converged]}


def _schedule(args, qm) -> annealer.AnnealSchedule:
    base = annealer.default_schedule(qm)
    return annealer.AnnealSchedule(
        args.t_start if args.t_start is not None else base.t_start,
        args.t_end if args.t_end is not None else base.t_end,
        args.sweeps if args.sweeps is not None else base.sweeps,
        args.moves_per_sweep)


def _load_qm(path) -> encoding.QuadraticModel:
    data = json.loads(Path(path).read_text())
    if "num_vars" in data:
        return annealer.qubo_from_dict(data)
    return encoding.quadratic_model_from_dict(data)


def _cmd_anneal(args, out: _Outputs, stdout) -> dict:
    qm = _load_qm(args.model)
    sched = _schedule(args, qm)
    best = None
    for r in range(args.restarts):
        res = annealer.simulated_anneal(qm, sched, args.seed + r)
        if best is None or res.best_energy < best.best_energy:
            best = res
    result = {
        "best_energy": best.best_energy,
        "seed": best.seed,
        "domain": qm.domain,
        "config": [[k, int(v)] for k, v in enumerate(best.best_config)],
        "energy_trace": best.energy_trace.tolist() if args.trace else None,
    }
    text = json.dumps(result, indent=1)
    if args.out:
        out.add(args.out, text)
    else:
        stdout.write(text + "\n")
    return {"best_energy": best.best_energy}


def _parse_answers(entries: list[str]) -> dict[int, Path]:
    answers = {}
    for entry in entries or []:
        if "=" not in entry:
            raise DomainError(f"answer must look like ROUND=PATH, got {entry!r}")
        r, path = entry.split("=", 1)
        answers[int(r)] = Path(path)
    return answers


def _cmd_iterate(args, out: _Outputs, stdout) -> dict:
    model = encoding.load_instance(args.instance)
    sched = None
    if any(v is not None for v in (args.t_start, args.t_end, args.sweeps)):
        qm0 = encoding.encode_half_hot_ising(model, args.lam)
        sched = _schedule(args, qm0)
    solver = annealer.SASolver(sched, args.seed)
    if args.export_dir or args.answer:
        solver = annealer.FileSolver(Path(args.export_dir or "."), _parse_answers(args.answer),
                                     fallback=None if args.answer_only else solver)
    res = annealer.iterate_half_hot(model, args.lam, sched, args.seed, solver,
                                    repair_budget=args.repair_budget)
    result = {
        "assignment": res.assignment.tolist(),
        "energy": res.energy,
        "rounds": res.rounds,
        "history": [h.to_dict() for h in res.history],
    }
    text = json.dumps(result, indent=1)
    if args.out:
        out.add(args.out, text)
    else:
        stdout.write(text + "\n")
    return {"energy": res.energy, "rounds": res.rounds}


# ---------------------------------------------------------------- parser

def _add_schedule_flags(sp) -> None:
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--sweeps", type=int)
    sp.add_argument("--t-start", type=float)
    sp.add_argument("--t-end", type=float)
    sp.add_argument("--moves-per-sweep", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="potts-anneal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("encode", help="encode a Potts instance as a quadratic model")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--encoding", choices=sorted(encoding.ENCODERS), default="half_hot_ising")
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sp.add_argument("--out")
    sp.add_argument("--qubo", help="also write a binary QUBO file")
    sp.set_defaults(func=_cmd_encode)

    sp = sub.add_parser("meanfield", help="order-parameter sweep over the transverse field")
    sp.add_argument("--Q", type=int, required=True)
    sp.add_argument("--constraint", choices=meanfield.CONSTRAINTS, default=meanfield.ONE_HOT)
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sp.add_argument("--J", type=float, default=1.0)
    sp.add_argument("--gamma-max", type=float, default=2.0)
    sp.add_argument("--gamma-step", type=float, default=0.01)
    sp.add_argument("--beta", type=float, default=math.inf)
    sp.add_argument("--threads", type=int, default=_default_threads())
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_meanfield)

    sp = sub.add_parser("infq", help="large-Q self-consistent magnetisation")
    sp.add_argument("--J", type=float, default=1.0)
    sp.add_argument("--beta", type=float, default=math.inf)
    sp.add_argument("--gamma", type=_float_list, help="comma-separated values")
    sp.add_argument("--gamma-max", type=float)
    sp.add_argument("--gamma-step", type=float)
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_infq)

    sp = sub.add_parser("replica", help="replica-symmetric glass scan over (beta, gamma)")
    sp.add_argument("--J", type=float, default=1.0)
    sp.add_argument("--J0", type=float, default=0.0)
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sp.add_argument("--Q", default="inf")
    sp.add_argument("--beta", type=_float_list, help="comma-separated values")
    sp.add_argument("--beta-max", type=float)
    sp.add_argument("--beta-step", type=float)
    sp.add_argument("--gamma", type=_float_list, help="comma-separated values")
    sp.add_argument("--gamma-max", type=float)
    sp.add_argument("--gamma-step", type=float)
    sp.add_argument("--order", type=int, default=replica.DEFAULT_ORDER)
    sp.add_argument("--damping", type=float, default=0.5)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--max-iter", type=int, default=10_000)
    sp.add_argument("--threads", type=int, default=_default_threads())
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_replica)

    sp = sub.add_parser("anneal", help="simulated annealing on a model or QUBO file")
    sp.add_argument("--model", required=True)
    sp.add_argument("--restarts", type=int, default=1)
    sp.add_argument("--trace", action="store_true", help="include the per-sweep best energy")
    _add_schedule_flags(sp)
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_anneal)

    sp = sub.add_parser("iterate", help="iterative half-hot optimisation")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    _add_schedule_flags(sp)
    sp.add_argument("--export-dir", help="write each round's QUBO here")
    sp.add_argument("--answer", action="append", metavar="ROUND=PATH",
                    help="answer file for a round (binary config)")
    sp.add_argument("--answer-only", action="store_true",
                    help="fail rounds without an answer file instead of annealing")
    sp.add_argument("--repair-budget", type=int)
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_iterate)
    return parser


def dispatch(argv: Sequence[str] | None = None, stdout=None) -> int:
    """Run one subcommand; returns the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    out = _Outputs()
    try:
        results = args.func(args, out, stdout)
        params = {k: v for k, v in vars(args).items() if k != "func"}
        manifest = RunManifest(args.command, params, int(getattr(args, "seed", 0) or 0),
                               argv=argv, results=results)
        out.commit(manifest)
    except _RUNTIME_ERRORS as exc:
        print(f"potts-anneal {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
