"""Command-line entry point: ``dxl <subcommand> --config FILE [options]``."""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..errors import ConfigError, DomainError, NumericError
from ..feedback import NoisyOracle
from ..hermitian import frobenius
from ..learning import (
    LinearOracle,
    SolverConfig,
    StepSchedule,
    gibbs_solution,
    perturbed_objective,
    solve,
)
from .extrema import reference_extrema
from .runner import (
    _Setup,
    _atomic_write,
    compare_baselines,
    run_scenario,
    write_outputs,
)
from .scenario import Problem, Scenario, apply_overrides, load_config

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_NONCONVERGED = 0, 2, 3, 4
SUBCOMMANDS = ("solve", "mimo-sync", "mimo-async", "mimo-noisy", "mimo-fading", "baseline", "extrema")

log = logging.getLogger("dxl")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dxl", description="Discounted matrix exponential learning experiments."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="JSON scenario or problem file")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--out", type=Path, help="output directory (default runs/<name>)")
        p.add_argument("--iters", type=int, help="override the iteration budget")
        p.add_argument("--tau", type=float, help="override the discount parameter")
        p.add_argument("--quiet", action="store_true", help="print nothing on success")
        p.add_argument("--strict", action="store_true",
                       help="exit with status 4 when a run or the extrema did not converge")
        p.add_argument("--plot", action="store_true", help="also render PNG figures")
    return parser


def _expect(config, kind, command):
    if not isinstance(config, kind):
        wanted = "dxl-problem/1" if kind is Problem else "dxl-scenario/1"
        raise ConfigError(f"{command}: needs a {wanted} document")


def _solve(problem, out, plot):
    oracle = LinearOracle(problem.C)
    if problem.noise_eta > 0:
        oracle = NoisyOracle(oracle, problem.noise_eta)
    s = problem.solver.schedule
    config = SolverConfig(
        problem.solver.tau, StepSchedule(s.kind, s.gamma0, s.exponent),
        max_iters=problem.iters, residual_tol=problem.solver.residual_tol, seed=problem.seed,
    )
    traj = solve(oracle, problem.C.shape[0], config)
    target = gibbs_solution(problem.C, problem.solver.tau)
    C = LinearOracle(problem.C)
    lines = ["iteration,objective,perturbed_objective,residual,gibbs_distance"]
    for n, state in enumerate(traj.states):
        X = state.X
        value = C.value(X)
        res = 0.0 if n == 0 else traj.residuals[n - 1]
        lines.append(",".join([
            str(state.iter), repr(float(value)),
            repr(float(perturbed_objective(value, X, problem.solver.tau))),
            repr(float(res)), repr(float(frobenius(X - target))),
        ]))
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / f"{problem.name}.csv", "\n".join(lines) + "\n")
    summary = {
        "schema": "dxl-manifest/1",
        "problem": problem.name,
        "scenario_hash": problem.hash,
        "seed": problem.seed,
        "iterations": traj.final.iter,
        "converged": traj.converged,
        "final_residual": traj.residuals[-1],
        "gibbs_distance": float(frobenius(traj.final.X - target)),
    }
    _atomic_write(out / "manifest.json", json.dumps(summary, indent=2) + "\n")
    if plot:
        from .report import plot_residuals

        plot_residuals([st.iter for st in traj.states[1:]], traj.residuals,
                       out / f"{problem.name}-residual.png", problem.name)
    tol = problem.solver.residual_tol
    return summary, tol == 0 or traj.converged


def _extrema(scenario, out):
    setup = _Setup(scenario)
    channel = setup.channel(0)
    spec = scenario.extrema
    ext = reference_extrema(channel, spec.tol, spec.starts, spec.min_restarts,
                            [scenario.seed, 1, 0])
    summary = {
        "schema": "dxl-manifest/1",
        "scenario": scenario.name,
        "scenario_hash": scenario.hash,
        "seed": scenario.seed,
        "phi_max": ext.max_sum_rate,
        "phi_min": ext.min_sum_rate,
        "residual": ext.residual,
        "approximate": bool(ext.approximate),
        "degenerate": bool(ext.degenerate),
    }
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "extrema.json", json.dumps(summary, indent=2) + "\n")
    return summary, not bool(ext.approximate)


def _mimo(command, scenario, out, plot):
    if command == "mimo-sync":
        scenario = replace(scenario, engine="sync")
    elif command == "mimo-async":
        scenario = replace(scenario, engine="async")
    elif command == "mimo-noisy" and scenario.noise.kind == "none":
        raise ConfigError("mimo-noisy: the scenario has noise.kind = 'none'")
    elif command == "mimo-fading" and scenario.fading.kind == "static":
        raise ConfigError("mimo-fading: the scenario has a static channel")
    table = None
    if command == "baseline":
        records, table, summary = compare_baselines(scenario, out)
    else:
        records = run_scenario(scenario, out)
        summary = {
            f"{r.name}/{r.method}": {
                "final_efficiency": float(r.efficiency[-1]),
                "broadcasts_to_0.99": r.broadcasts_to(),
            }
            for r in records
        }
    if plot:
        from .report import render

        render(records, out, table)
    ok = all(
        r.metadata["converged"] and not r.metadata["extrema_approximate"]
        for r in records if r.method.startswith("dxl")
    )
    return summary, ok


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s")
    try:
        config = apply_overrides(load_config(args.config), args.seed, args.iters, args.tau)
        out = args.out or Path("runs") / config.name
        with np.errstate(over="raise", invalid="raise"):
            if args.command == "solve":
                _expect(config, Problem, args.command)
                summary, ok = _solve(config, out, args.plot)
            else:
                _expect(config, Scenario, args.command)
                if args.command == "extrema":
                    summary, ok = _extrema(config, out)
                else:
                    summary, ok = _mimo(args.command, config, out, args.plot)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, DomainError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if not args.quiet:
        print(json.dumps(summary, indent=2, default=str))
        log.info("outputs written to %s", out)
    if args.strict and not ok:
        print("not converged", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK
