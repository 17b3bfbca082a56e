"""Command-line front end.

Subcommands build a target (or read one), solve for symmetric phases and
write a JSON phase file.  Exit codes:

    0  success
    1  ``verify`` found a tolerance violation
    2  a solve did not converge (file still written, marked failed)
    3  warm-start file does not fit the target
    4  invalid target
    5  unreadable or corrupt input
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional

import numpy as np

from . import approx, su2
from .chebyshev import ChebSeries, clenshaw_eval
from .optimizer import (
    InvalidTargetError,
    SolveReport,
    SolverConfig,
    auto_divisor,
    lbfgs_solve,
    max_node_error,
    mean_squared_loss,
    random_initial,
    reduced_length,
)
from .padding import WarmStartMismatch, padded_warm_start

FORMAT_NAME = "qspopt-phases"
FORMAT_VERSION = 1
THREADS_ENV = "QSP_NUM_THREADS"
CHECK_POINTS = 10_001
NODE_REPRODUCTION_TOL = 1e-14

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_NONCONVERGED = 2
EXIT_WARM_START = 3
EXIT_INVALID_TARGET = 4
EXIT_IO = 5


class CorruptFileError(ValueError):
    pass


# --------------------------------------------------------------------------
# file formats


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".qspopt-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_coefficients(series: ChebSeries) -> str:
    if series.parity is None:
        raise ValueError("coefficient files need a parity")
    lines = [f"parity: {series.parity}"]
    lines += [format(float(c), ".17g") for c in series.coeffs]
    return "\n".join(lines) + "\n"


def write_coefficient_file(path: str, series: ChebSeries) -> None:
    atomic_write_text(path, format_coefficients(series))


def parse_coefficients(text: str) -> ChebSeries:
    """Inverse of :func:`format_coefficients`; ``#`` starts a comment."""
    parity = None
    values = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if parity is None:
            key, sep, val = line.partition(":")
            if not sep or key.strip().lower() != "parity":
                raise CorruptFileError("first line must be 'parity: even|odd'")
            parity = val.strip().lower()
            if parity not in ("even", "odd"):
                raise CorruptFileError(f"unknown parity {parity!r}")
            continue
        try:
            values.append(float(line))
        except ValueError as exc:
            raise CorruptFileError(f"bad coefficient line {raw!r}") from exc
    if parity is None or not values:
        raise CorruptFileError("coefficient file has no header or no coefficients")
    if not np.all(np.isfinite(values)):
        raise CorruptFileError("non-finite coefficient")
    try:
        return ChebSeries(np.array(values), parity)
    except ValueError as exc:
        raise InvalidTargetError(str(exc)) from exc


def read_coefficient_file(path: str) -> ChebSeries:
    with open(path) as fh:
        return parse_coefficients(fh.read())


def dump_phase_file(doc: dict) -> str:
    # json writes floats with repr, the shortest string that reads back bit-exactly
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def load_phase_file(path: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CorruptFileError(f"{path}: not valid JSON ({exc})") from exc
    _validate_phase_doc(doc)
    return doc


def _validate_phase_doc(doc) -> None:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise CorruptFileError("not a qspopt phase file")
    if doc.get("version") != FORMAT_VERSION:
        raise CorruptFileError(f"unsupported version {doc.get('version')!r}")
    parts = doc.get("parts")
    if not isinstance(parts, list) or not parts:
        raise CorruptFileError("phase file has no parts")
    for p in parts:
        for key in ("label", "parity", "degree", "phases", "target_coefficients", "max_node_error", "epsilon"):
            if key not in p:
                raise CorruptFileError(f"part is missing {key!r}")
        phases = np.asarray(p["phases"], dtype=float)
        if phases.ndim != 1 or phases.size != p["degree"] + 1 or not np.all(np.isfinite(phases)):
            raise CorruptFileError(f"part {p['label']}: malformed phase list")
        if np.max(np.abs(phases - phases[::-1])) > 1e-12:
            raise CorruptFileError(f"part {p['label']}: phases are not symmetric")


# --------------------------------------------------------------------------
# solving


class Part:
    """One real, definite-parity target plus an optional reference function."""

    def __init__(
        self,
        label: str,
        target: ChebSeries,
        reference: Optional[Callable] = None,
        domain: tuple = (-1.0, 1.0),
    ):
        self.label = label
        self.target = target
        self.reference = reference
        self.domain = domain

    def check_grid(self, n: int = CHECK_POINTS) -> np.ndarray:
        a, b = self.domain
        return np.linspace(a, b, n)

    def reference_values(self, x: np.ndarray) -> np.ndarray:
        if self.reference is None:
            return clenshaw_eval(self.target, x)
        return self.reference(x)


def _thread_count(n_parts: int) -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        n = 1
    return max(1, min(n, n_parts))


def _part_record(part: Part, report, config: SolverConfig) -> dict:
    x = part.check_grid()
    linf = float(np.max(np.abs(su2.real_component(report.phases, x) - part.reference_values(x))))
    node_err = float(report.max_node_error)
    return {
        "label": part.label,
        "parity": report.parity,
        "degree": int(report.target_degree),
        "phases": [float(v) for v in report.phases],
        "target_coefficients": [float(v) for v in part.target.coeffs],
        "max_node_error": node_err,
        "objective_value": float(report.objective_value),
        "linf_error_vs_function": linf,
        "check_domain": list(part.domain),
        "iterations": int(report.iterations),
        "wall_time_seconds": float(report.wall_time),
        "converged": bool(report.converged),
        "epsilon": config.epsilon,
        "message": report.message,
    }


def run_parts(parts, config: SolverConfig, initial=None) -> list:
    """Solve every part, concurrently when the thread variable allows it."""

    def one(part):
        return lbfgs_solve(part.target, config, initial=initial)

    workers = _thread_count(len(parts))
    if workers == 1:
        reports = [one(p) for p in parts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(one, parts))
    return [_part_record(p, r, config) for p, r in zip(parts, reports)]


def build_document(kind: str, params: dict, divisor: float, records: list) -> dict:
    ok = all(r["converged"] for r in records)
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "target": {"kind": kind, "parameters": params},
        "scale_divisor": float(divisor),
        "status": "converged" if ok else "failed",
        "parts": records,
    }


def _print_summary(doc: dict, out=sys.stdout) -> None:
    t = doc["target"]
    params = ", ".join(f"{k}={v}" for k, v in t["parameters"].items())
    print(f"{t['kind']} ({params}), divisor {doc['scale_divisor']:.6g}, status {doc['status']}", file=out)
    print(f"{'part':<10} {'degree':>6} {'iters':>6} {'time[s]':>9} {'node err':>10} {'L-inf err':>10}", file=out)
    for p in doc["parts"]:
        print(
            f"{p['label']:<10} {p['degree']:>6} {p['iterations']:>6} {p['wall_time_seconds']:>9.3f} "
            f"{p['max_node_error']:>10.2e} {p['linf_error_vs_function']:>10.2e}",
            file=out,
        )


def _emit_plot_data(path: str, parts, records, n: int = 1001) -> None:
    cols, header = [], []
    for part, rec in zip(parts, records):
        x = part.check_grid(n)
        cols += [x, su2.real_component(np.asarray(rec["phases"]), x), part.reference_values(x)]
        header += [f"x_{part.label}", f"f_phi_{part.label}", f"f_{part.label}"]
    table = np.column_stack(cols)
    lines = ["# " + " ".join(header)]
    lines += [" ".join(format(v, ".17g") for v in row) for row in table]
    atomic_write_text(path, "\n".join(lines) + "\n")


def _finish(args, kind, params, divisor, parts, initial=None) -> int:
    config = _config(args)
    records = run_parts(parts, config, initial)
    doc = build_document(kind, params, divisor, records)
    if args.out:
        atomic_write_text(args.out, dump_phase_file(doc))
    if args.emit_plot_data:
        _emit_plot_data(args.emit_plot_data, parts, records)
    _print_summary(doc)
    return EXIT_OK if doc["status"] == "converged" else EXIT_NONCONVERGED


def _config(args) -> SolverConfig:
    return SolverConfig(
        epsilon=args.epsilon,
        max_iterations=args.max_iter,
        lbfgs_memory=args.lbfgs_memory,
    )


# --------------------------------------------------------------------------
# subcommands


def cmd_hamsim(args) -> int:
    if not args.tau > 0:
        raise InvalidTargetError("tau must be positive")
    even, odd, d = approx.jacobi_anger(args.tau, args.eps0)
    divisor = 2.0
    tau = args.tau
    parts = [
        Part("real", approx.scale_series(even, divisor), lambda x: np.cos(tau * x) / divisor),
        Part(
            "imag",
            approx.scale_series(ChebSeries(-odd.coeffs, "odd"), divisor),
            lambda x: -np.sin(tau * x) / divisor,
        ),
    ]
    return _finish(args, "hamsim", {"tau": tau, "eps0": args.eps0, "degree": d}, divisor, parts)


def cmd_eigenfilter(args) -> int:
    if args.k < 1 or not 0 < args.delta < 1:
        raise InvalidTargetError("need k >= 1 and 0 < delta < 1")
    divisor = math.sqrt(2.0)
    series = approx.eigenstate_filter(args.k, args.delta)
    f = approx.eigenstate_filter_function(args.k, args.delta)
    parts = [Part("real", approx.scale_series(series, divisor), lambda x: f(x) / divisor)]
    return _finish(args, "eigenfilter", {"k": args.k, "delta": args.delta}, divisor, parts)


def cmd_matinv(args) -> int:
    kappa = args.kappa
    if not kappa >= 2:
        raise InvalidTargetError("kappa must be at least 2")
    if args.method == "trunc":
        series = approx.inverse_truncation(kappa, args.eps0)
        norm = 1.0
    else:
        kind = args.method.split("-", 1)[1]
        try:
            series = approx.inverse_remez(kappa, args.eps0, kind)
        except approx.RemezError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NONCONVERGED
        norm = series.meta["normalization"]
    divisor = auto_divisor(series)
    scale = norm * divisor
    parts = [
        Part(
            "real",
            approx.scale_series(series, divisor),
            lambda x: 1.0 / (scale * x),
            domain=(1.0 / kappa, 1.0),
        )
    ]
    params = {
        "kappa": kappa,
        "method": args.method,
        "eps0": args.eps0,
        "approximation_degree": series.nominal_degree,
        "normalization": norm,
    }
    print(f"approximation degree {series.nominal_degree}")
    return _finish(args, "matinv", params, divisor, parts)


def _warm_start_phases(path: str, target: ChebSeries):
    doc = load_phase_file(path)
    for p in doc["parts"]:
        if target.parity is None or p["parity"] == target.parity:
            prev = SolveReport(
                phases=np.asarray(p["phases"], dtype=float),
                objective_value=float("nan"),
                max_node_error=p["max_node_error"],
                iterations=0,
                wall_time=0.0,
                scale_divisor=doc.get("scale_divisor", 1.0),
                target_degree=p["degree"],
                converged=bool(p.get("converged", True)),
                parity=p["parity"],
            )
            return padded_warm_start(prev, target)
    raise WarmStartMismatch(f"{path} has no part with parity {target.parity}")


def cmd_solve(args) -> int:
    target = read_coefficient_file(args.coefficients)
    if args.divisor != 1.0:
        target = approx.scale_series(target, args.divisor)
    initial = None
    if args.warm_start:
        initial = _warm_start_phases(args.warm_start, target)
    parts = [Part("real", target)]
    params = {"source": os.path.basename(args.coefficients), "warm_start": bool(args.warm_start)}
    return _finish(args, "solve", params, args.divisor, parts, initial=initial)


def grid_tolerance(epsilon: float, degree: int) -> float:
    """Bound on the uniform-grid error implied by node errors below ``epsilon``.

    f_phi - f has degree below 2 * n_nodes and is interpolated exactly at the
    roots of T_{2 n_nodes}, so the Lebesgue constant of those roots bounds the
    growth; a small absolute slack covers rounding.
    """
    n = 2 * reduced_length(degree)
    return (2.0 / math.pi * math.log(n) + 1.0) * epsilon + 1e-14


def verify_document(doc: dict, samples: int) -> list:
    """Per-part verification results; each entry has an ``ok`` flag."""
    results = []
    for p in doc["parts"]:
        phases = np.asarray(p["phases"], dtype=float)
        try:
            target = ChebSeries(np.asarray(p["target_coefficients"], dtype=float), p["parity"])
        except ValueError as exc:
            raise CorruptFileError(f"part {p['label']}: {exc}") from exc
        node_err = max_node_error(phases, target)
        stored = float(p["max_node_error"])
        eps = float(p["epsilon"])
        row = {
            "label": p["label"],
            "node_error": node_err,
            "stored_node_error": stored,
            "reproduces": abs(node_err - stored) <= NODE_REPRODUCTION_TOL,
            "below_epsilon": node_err < eps,
            "grid_error": None,
            "grid_ok": True,
        }
        if samples > 0:
            x = np.linspace(-1.0, 1.0, samples)
            g = float(np.max(np.abs(su2.real_component(phases, x) - clenshaw_eval(target, x))))
            row["grid_error"] = g
            row["grid_ok"] = g <= grid_tolerance(eps, phases.size - 1)
        row["ok"] = row["reproduces"] and row["below_epsilon"] and row["grid_ok"]
        results.append(row)
    return results


def cmd_verify(args) -> int:
    if args.samples < 0:
        raise InvalidTargetError("samples must be nonnegative")
    doc = load_phase_file(args.phase_file)
    results = verify_document(doc, args.samples)
    for r in results:
        grid = "n/a" if r["grid_error"] is None else f"{r['grid_error']:.3e}"
        print(
            f"{r['label']:<8} node error {r['node_error']:.3e} (stored {r['stored_node_error']:.3e}) "
            f"grid error {grid}  {'PASS' if r['ok'] else 'FAIL'}"
        )
    return EXIT_OK if all(r["ok"] for r in results) else EXIT_VERIFY_FAILED


def cmd_landscape(args) -> int:
    """Canonical start against seeded random starts on the cos(tau x)/2 target."""
    even, _, _ = approx.jacobi_anger(args.tau, args.eps0)
    target = approx.scale_series(even, 2.0)
    d = target.nominal_degree
    base = _config(args)
    rep = lbfgs_solve(target, base)
    print(f"canonical: node error {rep.max_node_error:.3e} after {rep.iterations} iterations")
    capped = SolverConfig(
        epsilon=base.epsilon, max_iterations=args.iterations, lbfgs_memory=base.lbfgs_memory
    )
    rows = []
    rng = np.random.default_rng(args.seed)
    for trial in range(args.trials):
        seed = int(rng.integers(2**32))
        r = lbfgs_solve(target, capped, initial=random_initial(d, seed))
        loss = mean_squared_loss(r.reduced, target)
        rows.append(loss)
        print(f"random seed {seed}: loss {loss:.3e}, node error {r.max_node_error:.3e}")
    stuck = sum(loss > args.stuck_threshold for loss in rows)
    print(f"{stuck} of {args.trials} random starts above loss {args.stuck_threshold:g}")
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


# --------------------------------------------------------------------------
# argument parsing


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=1e-12, help="node error tolerance")
    p.add_argument("--max-iter", type=int, default=50_000)
    p.add_argument("--lbfgs-memory", type=int, default=200)


def _output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="phase file to write (JSON)")
    p.add_argument("--emit-plot-data", metavar="PATH", help="write x, f_phi(x), f(x) columns")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qspopt", description="Phase factors for quantum signal processing")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("hamsim", help="cos(tau x)/2 and -sin(tau x)/2")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--eps0", type=float, default=1e-14, help="truncation tolerance")
    _solver_flags(p)
    _output_flags(p)
    p.set_defaults(func=cmd_hamsim)

    p = sub.add_parser("eigenfilter", help="eigenstate filter divided by sqrt(2)")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    _solver_flags(p)
    _output_flags(p)
    p.set_defaults(func=cmd_eigenfilter)

    p = sub.add_parser("matinv", help="polynomial approximations of 1/x on [1/kappa, 1]")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--method", choices=("trunc", "remez-odd", "remez-even"), default="trunc")
    p.add_argument("--eps0", type=float, default=1e-14)
    _solver_flags(p)
    _output_flags(p)
    p.set_defaults(func=cmd_matinv)

    p = sub.add_parser("solve", help="solve for a target given as a coefficient file")
    p.add_argument("coefficients", help="'parity: even|odd' header, then one coefficient per line")
    p.add_argument("--divisor", type=float, default=1.0, help="divide the target by this first")
    p.add_argument("--warm-start", metavar="PHASE_FILE", help="pad phases from an earlier solve")
    _solver_flags(p)
    _output_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="re-check a phase file")
    p.add_argument("phase_file")
    p.add_argument("--samples", type=int, default=10_001, help="uniform grid size; 0 checks nodes only")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("landscape", help="canonical versus random starting points")
    p.add_argument("--tau", type=float, default=100.0)
    p.add_argument("--eps0", type=float, default=1e-14)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--stuck-threshold", type=float, default=1e-3)
    _solver_flags(p)
    p.set_defaults(func=cmd_landscape)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except WarmStartMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_WARM_START
    except InvalidTargetError as exc:
        print(f"error: invalid target: {exc}", file=sys.stderr)
        return EXIT_INVALID_TARGET
    except (CorruptFileError, OSError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
