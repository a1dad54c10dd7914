"""Benchmark harness: run the three benchmarks, print tables, export fields.

Exit codes: 0 on full convergence, 2 on partial results, 1 on usage
errors.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import sys
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

from .energies import EnergyProblem, build_problem
from .mesh import MeshData
from .minimize import (
    MinimizeResult,
    NewtonConfig,
    NewtonError,
    benchmark_initial_guess,
    continuation_hyperelastic,
    newton_minimize,
)

__all__ = ["BenchmarkReport", "ReportRow", "run_benchmark", "report_table", "export_solution", "main"]

BENCHMARK_NAMES = {"plaplace": "plaplace", "gl": "ginzburg_landau", "hyper": "neohooke"}
CSV_HEADER = "dofs,setup_s,solve_s,iters,J"


@dataclass(frozen=True)
class ReportRow:
    dofs: int
    setup_s: float
    solve_s: float
    iters: int
    J: float


@dataclass(eq=False)
class BenchmarkReport:
    """Rows of one benchmark run plus the configuration that produced them."""

    benchmark: str
    rows: list[ReportRow]
    config: dict
    complete: bool = True
    results: list[tuple[MinimizeResult, EnergyProblem]] = field(default_factory=list, repr=False)
    error: str | None = None


def _parse_levels(text: str) -> list[int]:
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    if "," in text:
        return [int(part) for part in text.split(",") if part.strip()]
    return [int(text)]


def _newton_config(overrides: dict) -> NewtonConfig:
    kwargs = {}
    if overrides.get("tol_grad") is not None:
        kwargs["grad_tol"] = float(overrides["tol_grad"])
    if overrides.get("tol_energy") is not None:
        kwargs["energy_tol"] = float(overrides["tol_energy"])
    if overrides.get("solver") is not None:
        kwargs["solver"] = overrides["solver"]
    return NewtonConfig(**kwargs)


def _run_level(kind: str, level: int, config: NewtonConfig):
    t0 = time.perf_counter()
    problem = build_problem(kind, level)
    setup_s = time.perf_counter() - t0

    rows: list[ReportRow] = []
    results: list[tuple[MinimizeResult, EnergyProblem]] = []
    t0 = time.perf_counter()
    if kind == "neohooke":
        steps = continuation_hyperelastic(level, config=config, problem=problem)
        solve_s = time.perf_counter() - t0
        for t in range(3, 25, 3):  # the reported load steps
            res = steps[t - 1]
            rows.append(
                ReportRow(
                    problem.n_dofs,
                    setup_s,
                    _proportional_step_time(steps, t, solve_s),
                    res.iterations,
                    res.energy,
                )
            )
            results.append((res, problem))
    else:
        u0 = benchmark_initial_guess(problem)
        res = newton_minimize(problem, u0, config)
        solve_s = time.perf_counter() - t0
        rows.append(ReportRow(problem.n_dofs, setup_s, solve_s, res.iterations, res.energy))
        results.append((res, problem))
    return rows, results


def _proportional_step_time(steps, t, total_solve_s):
    # per-step wall time is not tracked; report the proportional share
    iters = sum(s.iterations for s in steps) or 1
    return total_solve_s * steps[t - 1].iterations / iters


def run_benchmark(name: str, levels: Iterable[int], overrides: dict | None = None) -> BenchmarkReport:
    """Build and minimize each level, timing setup and solve separately.

    ``name`` is one of plaplace | gl | hyper.  Nonconvergence stops the
    run and yields a partial report (``complete = False``).
    """
    if name not in BENCHMARK_NAMES:
        raise ValueError(f"unknown benchmark {name!r}; expected one of {sorted(BENCHMARK_NAMES)}")
    kind = BENCHMARK_NAMES[name]
    overrides = overrides or {}
    config = _newton_config(overrides)
    levels = list(levels)

    report = BenchmarkReport(
        benchmark=name,
        rows=[],
        config={
            "benchmark": name,
            "levels": levels,
            "grad_tol": config.grad_tol,
            "energy_tol": config.energy_tol,
            "solver": config.solver,
        },
    )

    def one(level: int):
        return _run_level(kind, level, config)

    if overrides.get("parallel_levels") and len(levels) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=len(levels)) as pool:
            futures = [pool.submit(one, level) for level in levels]
            outcomes = []
            for future in futures:  # report rows stay ordered by level
                try:
                    outcomes.append(future.result())
                except NewtonError as exc:
                    report.complete = False
                    report.error = str(exc)
                    break
    else:
        outcomes = []
        for level in levels:
            try:
                outcomes.append(one(level))
            except NewtonError as exc:
                report.complete = False
                report.error = str(exc)
                break
    for rows, results in outcomes:
        report.rows.extend(rows)
        report.results.extend(results)
    return report


def report_table(report: BenchmarkReport, fmt: str = "text", stream: TextIO | None = None) -> str:
    """Render the report as text (4-decimal J), csv, or json."""
    lines: list[str] = []
    if fmt == "text":
        lines.append(f"benchmark: {report.benchmark}   config: {report.config}")
        lines.append(f"{'dofs':>10} {'setup_s':>10} {'solve_s':>10} {'iters':>6} {'J':>12}")
        for row in report.rows:
            lines.append(
                f"{row.dofs:>10d} {row.setup_s:>10.2f} {row.solve_s:>10.2f} "
                f"{row.iters:>6d} {row.J:>12.4f}"
            )
        if not report.complete:
            lines.append(f"incomplete: {report.error}")
    elif fmt == "csv":
        lines.append(CSV_HEADER)
        for row in report.rows:
            lines.append(
                f"{row.dofs},{row.setup_s:.17g},{row.solve_s:.17g},{row.iters},{row.J:.17g}"
            )
    elif fmt == "json":
        payload = [
            {"dofs": row.dofs, "setup_s": row.setup_s, "solve_s": row.solve_s,
             "iters": row.iters, "J": row.J}
            for row in report.rows
        ]
        lines.append(json.dumps(payload, indent=2))
    else:
        raise ValueError(f"unknown table format {fmt!r}")
    text = "\n".join(lines) + "\n"
    if stream is not None:
        stream.write(text)
    return text


def export_solution(result: MinimizeResult, mesh: MeshData, path: str, fmt: str = "csv") -> None:
    """Write the nodal solution field as CSV or legacy-ASCII VTK.

    CSV holds one row per node (coordinates then solution components) with
    a header row, '.' decimals, comma separators, and LF line endings at
    full (17 significant digit) precision.
    """
    values = result.u_full.reshape(mesh.n_nodes, -1)
    n_comp = values.shape[1]
    if fmt == "csv":
        coord_names = ["x", "y", "z"][: mesh.dim]
        value_names = ["u"] if n_comp == 1 else [f"v{ax}" for ax in ("x", "y", "z")[:n_comp]]
        rows = [",".join(coord_names + value_names)]
        for node in range(mesh.n_nodes):
            entries = [f"{c:.17g}" for c in mesh.nodes[node]] + [
                f"{v:.17g}" for v in values[node]
            ]
            rows.append(",".join(entries))
        with open(path, "w", newline="\n") as handle:
            handle.write("\n".join(rows) + "\n")
    elif fmt == "vtk-legacy":
        npe = mesh.elems.shape[1]
        cell_type = 5 if npe == 3 else 10
        lines = [
            "# vtk DataFile Version 3.0",
            "minfem solution export",
            "ASCII",
            "DATASET UNSTRUCTURED_GRID",
            f"POINTS {mesh.n_nodes} double",
        ]
        for node in range(mesh.n_nodes):
            coords = list(mesh.nodes[node]) + [0.0] * (3 - mesh.dim)
            lines.append(" ".join(f"{c:.17g}" for c in coords))
        lines.append(f"CELLS {mesh.n_elems} {mesh.n_elems * (npe + 1)}")
        for elem in mesh.elems:
            lines.append(" ".join([str(npe)] + [str(int(v)) for v in elem]))
        lines.append(f"CELL_TYPES {mesh.n_elems}")
        lines.extend([str(cell_type)] * mesh.n_elems)
        lines.append(f"POINT_DATA {mesh.n_nodes}")
        if n_comp == 1:
            lines.append("SCALARS u double 1")
            lines.append("LOOKUP_TABLE default")
            for node in range(mesh.n_nodes):
                lines.append(f"{values[node, 0]:.17g}")
        else:
            lines.append("VECTORS v double")
            for node in range(mesh.n_nodes):
                lines.append(" ".join(f"{v:.17g}" for v in values[node]))
        with open(path, "w", newline="\n") as handle:
            handle.write("\n".join(lines) + "\n")
    else:
        raise ValueError(f"unknown export format {fmt!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit with code 1
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="minfem", description="Nonlinear energy-minimization benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a benchmark and print its table")
    run.add_argument("benchmark", choices=sorted(BENCHMARK_NAMES))
    run.add_argument("--levels", help="refinement levels: N, N..M, or N,M,...")
    run.add_argument("--level", type=int, help="single refinement level")
    run.add_argument("--tol-grad", type=float, dest="tol_grad")
    run.add_argument("--tol-energy", type=float, dest="tol_energy")
    run.add_argument("--solver", choices=["auto", "direct", "amg", "diag-cg"])
    run.add_argument("--format", choices=["text", "csv", "json"], default="text")
    run.add_argument("--export", metavar="PATH", help="write the last solution field to PATH")
    run.add_argument("--export-format", choices=["csv", "vtk-legacy"], default="csv")
    run.add_argument("--parallel-levels", action="store_true")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.levels and args.level is not None:
        print("minfem: error: give either --level or --levels, not both", file=sys.stderr)
        return 1
    if args.levels:
        levels = _parse_levels(args.levels)
    elif args.level is not None:
        levels = [args.level]
    else:
        levels = [1]
    if any(level < 1 for level in levels):
        print("minfem: error: levels must be positive", file=sys.stderr)
        return 1

    overrides = {
        "tol_grad": args.tol_grad,
        "tol_energy": args.tol_energy,
        "solver": args.solver,
        "parallel_levels": args.parallel_levels,
    }
    report = run_benchmark(args.benchmark, levels, overrides)
    report_table(report, args.format, stream=sys.stdout)

    if args.export and report.results:
        result, problem = report.results[-1]
        export_solution(result, problem.mesh, args.export, args.export_format)
    return 0 if report.complete else 2


if __name__ == "__main__":
    sys.exit(main())
