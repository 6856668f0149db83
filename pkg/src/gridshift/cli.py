"""Command-line driver: `gridshift run-mpec | run-epec | run-benchmark | validate | export`

Every command reads a grid, a policy document and an optional run config whose keys mirror the
flags (flags win), and writes its artifacts to `<out>/<run-id>/`. Exit codes: 0 done (also for a
non-converged equilibrium), 2 bad input or configuration, 3 infeasible, 4 solver failure.
"""

from __future__ import annotations

from dataclasses import asdict
from pathlib import Path
from typing import Any, Literal
import argparse
import json
import logging
import sys

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

import pandas as pd

from .benchmark import build_benchmark, compare_expansion, solve_benchmark
from .conic_program import SolveResult
from .errors import (
    BenchmarkError, ConfigError, GridDataError, GridshiftError, HedgingError, LpFormatError, MarketError,
    MpecError, PolicyError, ProgramError, RpsInfeasibleError, ScenarioMismatchError, SolverError, UncertaintyError,
)
from .grid_model import GridModel, PolicySet, apply_retirement, load_grid, load_policies, preset_retirement, select_horizon
from .hedging import PhOptions, convergence_table, run_ph, timing_table
from .lp_format import write_lp_file
from .market import build_kkt_system, build_market_lp, build_offers
from .mpec import MpecOptions, build_mpec, extract_plan
from .plan import Plan, cost_summary, expansion_summary
from .records import RecordError, Record, RecordField
from .solver import SolverOptions, solve
from .validation import MIN_SAMPLES, audit_solution, format_report, monte_carlo_cc_check

logger = logging.getLogger('gridshift')

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4


class InfeasibleRun(GridshiftError):
    """A solve that proved infeasibility or unboundedness"""



## Run configuration
####################

class RunConfig(Record):
    grid: str = 'iso-ne'
    policies: str = 'iso-ne'
    scenario: str = 'basecase'
    state: str | None = None
    states: list[str] | None = None
    hours: int | None = RecordField(default=None, ge=1)
    days: list[str] | None = None
    backend: Literal['builtin', 'external'] = 'builtin'
    out: str = 'out'
    run_id: str | None = None
    bits: int = RecordField(default=10, ge=0, le=30)
    price_floor: float = 0.0
    price_step: float | None = RecordField(default=None, gt=0)
    no_chance_constraints: bool = False
    eps: float = RecordField(default=0.03, ge=0)
    rho_g: float = RecordField(default=0.7, ge=0)
    rho_lambda: float = RecordField(default=0.7, ge=0)
    max_iter: int = RecordField(default=200, ge=1)
    jobs: int | None = RecordField(default=None, ge=1)
    breakpoints: int = RecordField(default=8, ge=2)
    gap: float = RecordField(default=1e-4, ge=0)
    node_limit: int | None = RecordField(default=None, gt=0)
    time_limit: float | None = RecordField(default=None, gt=0)
    reserve_chance_constraints: bool = False
    compare: str | None = None
    result: str | None = None
    samples: int = RecordField(default=100_000, ge=MIN_SAMPLES)
    seed: int = 0
    program: Literal['mpec', 'benchmark', 'market', 'kkt'] = 'mpec'
    day: str | None = None

    def solver_options(self) -> SolverOptions:
        return SolverOptions(gap=self.gap, node_limit=self.node_limit, time_limit=self.time_limit)

    def mpec_options(self) -> MpecOptions:
        return MpecOptions(
            bits=self.bits, price_floor=self.price_floor, price_step=self.price_step,
            chance_constraints=not self.no_chance_constraints,
        )

    def ph_options(self) -> PhOptions:
        return PhOptions(
            tolerance=self.eps, max_iter=self.max_iter, rho_g=self.rho_g, rho_lambda=self.rho_lambda,
            breakpoints=self.breakpoints, jobs=self.jobs, backend=self.backend, scenario=self.scenario,
            solver=self.solver_options(), mpec=self.mpec_options(),
        )

def load_run_config(path: str | Path | None) -> dict[str, Any]:
    """Raw keys of a TOML or JSON run config; dashes in keys become underscores"""
    if path is None:
        return {}
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"run config `{path}` does not exist")
    try:
        if path.suffix.lower() == '.toml':
            with open(path, 'rb') as f:
                raw = tomllib.load(f)
        else:
            raw = json.loads(path.read_text())
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigError(f"could not parse `{path}`: {e}")
    return {key.replace('-', '_'): value for key, value in raw.items()}

def merge_config(args: argparse.Namespace) -> RunConfig:
    data = load_run_config(args.config)
    fields = set(RunConfig.record_fields())
    unknown = sorted(set(data) - fields)
    if unknown:
        raise ConfigError(f"unknown run config keys: {unknown}")
    for key, value in vars(args).items():
        if key in fields and value is not None:
            data[key] = value
    return RunConfig(**data)



## Helpers
##########

def _load_case(config: RunConfig) -> tuple[GridModel, PolicySet]:
    grid = load_grid(config.grid)
    grid = apply_retirement(grid, preset_retirement(grid, config.scenario))
    if config.hours is not None or config.days is not None:
        grid = select_horizon(grid, config.hours, config.days)
    policies = load_policies(config.policies)
    policies.check_grid(grid)
    return grid, policies

def _run_dir(config: RunConfig, command: str) -> Path:
    run_id = config.run_id or f"{command}-{config.scenario}"
    path = Path(config.out) / run_id
    path.mkdir(parents=True, exist_ok=True)
    return path

def _write_json(path: Path, data: Any) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=float) + "\n")

def _write_csv(path: Path, frame: pd.DataFrame) -> None:
    frame.to_csv(path, index=False)

def _check_result(result: SolveResult, what: str) -> None:
    if result.has_solution:
        if result.status != 'optimal':
            logger.warning("%s: stopped at `%s` with an incumbent (gap %s)", what, result.status, result.gap)
        return
    if result.status in ('infeasible', 'unbounded'):
        raise InfeasibleRun(f"{what} is {result.status}")
    raise SolverError(f"{what}: solver stopped at `{result.status}` without a solution")

def _write_plan(out: Path, plan: Plan, grid: GridModel, policies: PolicySet, extra: dict[str, Any]) -> dict:
    _write_json(out / 'result.json', {**extra, 'plan': plan.serialize()})
    _write_csv(out / 'expansion.csv', expansion_summary(plan, grid))
    _write_csv(out / 'costs.csv', cost_summary(plan, grid, policies))
    audit = audit_solution(grid, plan, policies)
    _write_json(out / 'audit.json', audit)
    return audit

def _read_plan(path: str | None) -> Plan:
    if path is None:
        raise ConfigError("this command needs --result pointing at a result.json")
    source = Path(path)
    if source.is_dir():
        source = source / 'result.json'
    if not source.exists():
        raise ConfigError(f"result file `{source}` does not exist")
    try:
        data = json.loads(source.read_text())
        return Plan(**data['plan'])
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise ConfigError(f"`{source}` is not a gridshift result: {e}")



## Commands
###########

def cmd_run_mpec(config: RunConfig) -> int:
    grid, policies = _load_case(config)
    if config.state is None:
        raise ConfigError("run-mpec needs --state")
    if config.state not in grid.states:
        raise ConfigError(f"unknown state `{config.state}`; the grid has {grid.states}")
    inst = build_mpec(grid, policies, config.state, options=config.mpec_options())
    result = solve(inst.program, config.solver_options(), config.backend)
    _check_result(result, f"MPEC of {config.state}")
    plan = extract_plan(inst, result, scenario=config.scenario)
    out = _run_dir(config, f"mpec-{config.state}")
    audit = _write_plan(out, plan, grid, policies, {
        'command': 'run-mpec', 'status': result.status, 'objective': result.objective,
        'gap': result.gap, 'stats': asdict(result.stats),
    })
    print(format_report(audit))
    print(f"results written to {out}")
    return EXIT_OK

def cmd_run_epec(config: RunConfig) -> int:
    grid, policies = _load_case(config)
    actors = config.states or [s for s in grid.states if s in policies.states] or grid.states
    if len(actors) < 2:
        raise ConfigError(f"run-epec needs at least two states, got {actors}")
    equilibrium = run_ph(actors, grid, policies, config.ph_options())
    out = _run_dir(config, 'epec')
    combined = _write_plan(out, equilibrium.plan, grid, policies, {
        'command': 'run-epec', 'converged': equilibrium.converged, 'iterations': equilibrium.iterations,
        'tolerance': equilibrium.tolerance, 'plans': {s: p.serialize() for s, p in equilibrium.plans.items()},
    })
    audits = {state: audit_solution(grid, plan, policies) for state, plan in equilibrium.plans.items()}
    _write_json(out / 'audit.json', {'combined': combined, 'actors': audits})
    _write_csv(out / 'convergence.csv', convergence_table(equilibrium))
    _write_csv(out / 'timings.csv', timing_table(equilibrium))
    flag = 'converged' if equilibrium.converged else 'NOT converged'
    print(f"equilibrium {flag} after {equilibrium.iterations} rounds, tolerance {equilibrium.tolerance:.6g}")
    print(f"results written to {out}")
    return EXIT_OK

def cmd_run_benchmark(config: RunConfig) -> int:
    grid, policies = _load_case(config)
    _, result, plan = solve_benchmark(
        grid, policies, options=config.solver_options(), backend=config.backend,
        use_chance_constraints=config.reserve_chance_constraints, scenario=config.scenario,
    )
    _check_result(result, "benchmark")
    out = _run_dir(config, 'benchmark')
    audit = _write_plan(out, plan, grid, policies, {
        'command': 'run-benchmark', 'status': result.status, 'objective': result.objective,
    })
    if config.compare is not None:
        _write_csv(out / 'comparison.csv', compare_expansion(_read_plan(config.compare), plan, grid))
    print(format_report(audit))
    print(f"results written to {out}")
    return EXIT_OK

def cmd_validate(config: RunConfig) -> int:
    grid, policies = _load_case(config)
    plan = _read_plan(config.result)
    eta = {state: policies.policy(state).security for state in plan.states}
    report = {
        'monte_carlo': monte_carlo_cc_check(grid, plan, eta, config.samples, config.seed),
        'audit': audit_solution(grid, plan, policies),
    }
    out = _run_dir(config, 'validate')
    _write_json(out / 'validation.json', report)
    print(format_report(report['monte_carlo']))
    print(format_report(report['audit']))
    return EXIT_OK

def cmd_export(config: RunConfig) -> int:
    grid, policies = _load_case(config)
    day = config.day or grid.day_ids[0]
    if config.program == 'mpec':
        if config.state is None:
            raise ConfigError("export of an MPEC needs --state")
        program = build_mpec(grid, policies, config.state, options=config.mpec_options()).program
    elif config.program == 'benchmark':
        program = build_benchmark(grid, policies, use_chance_constraints=config.reserve_chance_constraints).program
    else:
        mlp = build_market_lp(grid, build_offers(grid, None, {}), day)
        program = mlp.program if config.program == 'market' else build_kkt_system(mlp).program
    out = _run_dir(config, 'export')
    name = f"{config.program}-{config.state}" if config.program == 'mpec' else config.program
    path = write_lp_file(program, out / f"{name}.lp")
    print(f"wrote {path}")
    return EXIT_OK

COMMANDS = {
    'run-mpec': cmd_run_mpec,
    'run-epec': cmd_run_epec,
    'run-benchmark': cmd_run_benchmark,
    'validate': cmd_validate,
    'export': cmd_export,
}



## Parser
#########

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='gridshift', description="Strategic generation expansion under chance constraints")
    parser.add_argument('-v', '--verbose', action='count', default=0, help="more logging (-v info, -vv debug)")
    parser.add_argument('--log-file', help="also write the log to this file")
    sub = parser.add_subparsers(dest='command', required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help="TOML or JSON run config; flags override its values")
    common.add_argument('--grid', help="grid JSON file, CSV directory or `iso-ne`")
    common.add_argument('--policies', help="policy TOML/JSON or `iso-ne`")
    common.add_argument('--scenario', help="retirement scenario: basecase, coal, coal_nuclear")
    common.add_argument('--hours', type=int, help="keep only the first N hours of every day")
    common.add_argument('--days', nargs='+', help="keep only these representative days")
    common.add_argument('--backend', choices=['builtin', 'external'])
    common.add_argument('--out', help="results root directory (default out)")
    common.add_argument('--run-id', dest='run_id', help="results subdirectory name")
    common.add_argument('--gap', type=float, help="relative optimality gap")
    common.add_argument('--node-limit', dest='node_limit', type=int)
    common.add_argument('--time-limit', dest='time_limit', type=float, help="seconds")

    strategic = argparse.ArgumentParser(add_help=False)
    strategic.add_argument('--bits', type=int, help="binary price expansion length K")
    strategic.add_argument('--price-floor', dest='price_floor', type=float)
    strategic.add_argument('--price-step', dest='price_step', type=float)
    strategic.add_argument('--no-chance-constraints', dest='no_chance_constraints', action='store_const', const=True)

    p = sub.add_parser('run-mpec', parents=[common, strategic], help="one state's strategic expansion")
    p.add_argument('--state')

    p = sub.add_parser('run-epec', parents=[common, strategic], help="equilibrium among several states")
    p.add_argument('--states', nargs='+')
    p.add_argument('--eps', type=float, help="consensus tolerance")
    p.add_argument('--rho-g', dest='rho_g', type=float)
    p.add_argument('--rho-lambda', dest='rho_lambda', type=float)
    p.add_argument('--max-iter', dest='max_iter', type=int)
    p.add_argument('--jobs', type=int, help="concurrent subproblem solves")
    p.add_argument('--breakpoints', type=int)

    p = sub.add_parser('run-benchmark', parents=[common], help="centralized planning benchmark")
    p.add_argument('--compare', help="result.json of an MPEC/EPEC run to compare against")
    p.add_argument('--reserve-chance-constraints', dest='reserve_chance_constraints', action='store_const', const=True)

    p = sub.add_parser('validate', parents=[common], help="Monte Carlo and feasibility checks of a result")
    p.add_argument('--result', help="result.json or its run directory")
    p.add_argument('--samples', type=int)
    p.add_argument('--seed', type=int)

    p = sub.add_parser('export', parents=[common, strategic], help="write a program in LP text format")
    p.add_argument('--program', choices=['mpec', 'benchmark', 'market', 'kkt'])
    p.add_argument('--state')
    p.add_argument('--day')
    return parser

def configure_logging(verbosity: int, log_file: str | None = None) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", handlers=handlers, force=True)

def exit_code(error: Exception) -> int:
    if isinstance(error, (RpsInfeasibleError, InfeasibleRun)):
        return EXIT_INFEASIBLE
    if isinstance(error, HedgingError) and error.status is not None:
        return EXIT_INFEASIBLE if error.status in ('infeasible', 'unbounded') else EXIT_SOLVER
    if isinstance(error, BenchmarkError):
        return EXIT_INFEASIBLE
    if isinstance(error, (SolverError, ProgramError)):
        return EXIT_SOLVER
    return EXIT_CONFIG

def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.log_file)
    try:
        config = merge_config(args)
        return COMMANDS[args.command](config)
    except (
        RecordError, ConfigError, GridDataError, PolicyError, UncertaintyError, MarketError, MpecError,
        HedgingError, BenchmarkError, ScenarioMismatchError, LpFormatError, SolverError, ProgramError, InfeasibleRun,
    ) as e:
        code = exit_code(e)
        logger.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return code
    except OSError as e:
        logger.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
