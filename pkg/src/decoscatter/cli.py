"""Command-line front end: ``decoscatter <command> --scenario PATH``."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .analysis import rate_grid, reduction_scan
from .linalg import density_residuals, hermiticity_residual
from .oracles import run_oracle_checks
from .scattering import METHODS, OscillatorModel, build_nq_oscillator, \
    correlation_values
from .scenario_io import (
    RESULTS_HEADER,
    ScenarioError,
    emit_csv,
    format_float,
    load_scenario,
    results_rows,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_COMPUTATION = 2
EXIT_ORACLE = 3

COMMANDS = ("validate", "correlation", "rate", "scan", "oracle-check")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="decoscatter",
                description="Scattering rates of open quantum systems under "
                            "dephasing Lindblad dynamics.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--scenario", required=True,
                   help="scenario JSON file, or @name for a bundled one "
                        "(e.g. @two_level)")
    p.add_argument("--out", help="output path (default: standard output)")
    p.add_argument("--taus", type=int, default=101,
                   help="number of tau samples for 'correlation'")
    p.add_argument("--method", choices=METHODS,
                   help="rate method (default: analytic when H and X "
                        "commute, quadrature otherwise)")
    p.add_argument("--jobs", type=int, default=1,
                   help="worker threads for rate grids")
    return p


def _validate_report(scenario):
    lines = [f"dim: {scenario.dim}"]
    herm_h = hermiticity_residual(scenario.hamiltonian)
    herm_x = hermiticity_residual(scenario.lindblad_op)
    herm, trace_res, min_eig = density_residuals(scenario.rho0.op)
    tol = scenario.rho0.tolerance
    checks = [
        ("hamiltonian hermitian", f"residual {herm_h:.3e}", herm_h <= 1e-9),
        ("lindblad_op hermitian", f"residual {herm_x:.3e}", herm_x <= 1e-9),
        ("rho0 hermitian", f"residual {herm:.3e}", herm <= tol),
        ("rho0 unit trace", f"residual {trace_res:.3e}", trace_res <= tol),
        ("rho0 positive semidefinite", f"smallest eigenvalue {min_eig:.3e}",
         min_eig >= -tol),
    ]
    for q in scenario.q_grid:
        n = scenario.nq(q)
        checks.append((f"n(q={format_float(q)}) dimension",
                       f"{n.shape[0]}", n.shape[0] == scenario.dim))
    for name, detail, ok in checks:
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    if isinstance(scenario.nq_model, OscillatorModel):
        m = scenario.nq_model
        for q in scenario.q_grid:
            _, dev = build_nq_oscillator(scenario.dim, q, m.x_scale, m.padding)
            lines.append(f"INFO n(q={format_float(q)}) unitarity deviation: "
                         f"{dev:.3e}")
    if scenario.is_commuting():
        lines.append("INFO H and X commute: analytic path available")
    else:
        lines.append("INFO H and X do not commute: superoperator path only")
    return lines, all(ok for _, _, ok in checks)


def _write_text(lines, out):
    text = "".join(f"{line}\n" for line in lines)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _correlation_rows(scenario, n_taus):
    taus = np.linspace(0.0, max(scenario.tau_sc_grid), n_taus)
    for q in scenario.q_grid:
        for k in scenario.k_grid:
            values = correlation_values(scenario, q, taus, k)
            for tau, c in zip(taus, values):
                yield (format_float(q), format_float(k), format_float(tau),
                       format_float(c.real), format_float(c.imag))


def run_command(name, scenario, out=None, taus=101, method=None, jobs=1):
    """Execute one command on a parsed scenario; returns the exit status."""
    dest = out if out else sys.stdout
    if name == "validate":
        lines, ok = _validate_report(scenario)
        _write_text(lines, out)
        return EXIT_OK if ok else EXIT_COMPUTATION
    if name == "correlation":
        if taus < 2:
            raise ValueError("--taus must be >= 2")
        emit_csv(("q", "k", "tau", "re", "im"),
                 list(_correlation_rows(scenario, taus)), dest)
        return EXIT_OK
    if name in ("rate", "scan"):
        if name == "scan":
            table = reduction_scan(scenario, method, n_jobs=jobs)
        else:
            table = rate_grid(scenario, scenario.k_grid, method, n_jobs=jobs)
        emit_csv(RESULTS_HEADER, list(results_rows(table)), dest)
        failed = [r for r in table.rows if r.error]
        for r in failed:
            print(f"error at q={r.q} k={r.k} tau_sc={r.tau_sc}: {r.error}",
                  file=sys.stderr)
        return EXIT_COMPUTATION if failed else EXIT_OK
    if name == "oracle-check":
        report = run_oracle_checks(scenario)
        _write_text(list(report.lines()), out)
        return EXIT_OK if report.passed else EXIT_ORACLE
    raise ValueError(f"unknown command {name!r}")


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return run_command(args.command, scenario, args.out, args.taus,
                           args.method, args.jobs)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTATION


if __name__ == "__main__":
    sys.exit(main())
