"""Equilibrium among the states' strategic programs by progressive hedging over the leaders

Every actor solves its own MPEC; the market outcome each actor anticipates (dispatch of every unit
and every nodal price) is the hedged vector. Rounds repeat with the standard multiplier update and a
piecewise-linear proximal term until the actors agree.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal
import logging
import math
import os
import time

import numpy as np
import pandas as pd

from .conic_program import ConicProgram, LinExpr, SolveResult, Variable, var_name
from .errors import HedgingError
from .grid_model import GridModel, PolicySet
from .mpec import HedgeKey, MpecInstance, MpecOptions, build_mpec, extract_plan, hedge_keys
from .plan import Plan, plan_key
from .records import Record, RecordField
from .solver import SolverOptions, solve

logger = logging.getLogger(__name__)



## Options & state
##################

class PhOptions(Record):
    tolerance: float = RecordField(default=0.03, ge=0)
    max_iter: int = RecordField(default=200, ge=1)
    rho_g: float = RecordField(default=0.7, ge=0)
    rho_lambda: float = RecordField(default=0.7, ge=0)
    quadratic_weight: float = RecordField(default=1.0, ge=0)
    breakpoints: int = RecordField(default=8, ge=2)
    jobs: int | None = RecordField(default=None, ge=1)
    backend: Literal['builtin', 'external'] = 'builtin'
    scenario: str = 'basecase'
    solver: SolverOptions = RecordField(default_factory=SolverOptions)
    mpec: MpecOptions = RecordField(default_factory=MpecOptions)

@dataclass
class PhState:
    """Coordinator state between rounds; multiplier vectors follow `keys` for every actor"""
    actors: list[str]
    keys: list[HedgeKey]
    rho: np.ndarray
    iteration: int = 0
    multipliers: dict[str, np.ndarray] = field(default_factory=dict)
    averages: np.ndarray | None = None
    history: list[float] = field(default_factory=list)

@dataclass
class ActorSolve:
    state: str
    instance: MpecInstance
    result: SolveResult
    plan: Plan
    values: np.ndarray
    wall_time: float

@dataclass
class PhIteration:
    iteration: int
    tolerance: float
    objectives: dict[str, float]
    wall_time: float
    actor_times: dict[str, float] = field(default_factory=dict)
    multiplier_sum: float = 0.0

@dataclass
class EquilibriumResult:
    converged: bool
    iterations: int
    tolerance: float
    plan: Plan
    plans: dict[str, Plan]
    consensus: dict[HedgeKey, float]
    history: list[PhIteration] = field(default_factory=list)



## Algorithm steps
##################

def ph_initialize(actors: list[str], grid: GridModel, options: PhOptions | None = None) -> PhState:
    options = options or PhOptions()
    if len(actors) < 2:
        raise HedgingError(f"an equilibrium needs at least two leaders, got {list(actors)}")
    if len(set(actors)) != len(actors):
        raise HedgingError(f"duplicate leaders in {list(actors)}")
    for state in actors:
        if state not in grid.states:
            raise HedgingError("unknown state", actor=state)
    if options.rho_g == 0 or options.rho_lambda == 0:
        logger.warning("penalty factor 0 (rho_g=%s, rho_lambda=%s): rounds reduce to independent solves", options.rho_g, options.rho_lambda)

    keys = hedge_keys(grid)
    rho = np.array([options.rho_g if k[0] == 'g' else options.rho_lambda for k in keys])
    ph = PhState(list(actors), keys, rho)
    ph.multipliers = {state: np.zeros(len(keys)) for state in actors}
    return ph

def consensus_average(values: dict[str, np.ndarray] | list[np.ndarray]) -> np.ndarray:
    """Entry-wise mean with uniform actor weights"""
    vectors = list(values.values()) if isinstance(values, dict) else list(values)
    if not vectors:
        raise HedgingError("no hedged values to average")
    shapes = {np.shape(v) for v in vectors}
    if len(shapes) != 1:
        raise HedgingError(f"hedged vectors differ in shape: {sorted(shapes)}")
    return np.mean(np.stack([np.asarray(v, dtype=float) for v in vectors]), axis=0)

def compute_tolerance(values: dict[str, np.ndarray] | list[np.ndarray], averages: np.ndarray) -> float:
    """sum_s ||x_s - mean||_2 / max(1, ||mean||_2)"""
    vectors = list(values.values()) if isinstance(values, dict) else list(values)
    averages = np.asarray(averages, dtype=float)
    deviation = math.fsum(float(np.linalg.norm(np.asarray(v, dtype=float) - averages)) for v in vectors)
    if deviation == 0.0:
        return 0.0
    return deviation / max(1.0, float(np.linalg.norm(averages)))

def update_multipliers(ph: PhState, values: dict[str, np.ndarray], averages: np.ndarray) -> PhState:
    """m_s += rho * (x_s - mean) for every actor"""
    for state in ph.actors:
        ph.multipliers[state] = ph.multipliers[state] + ph.rho * (np.asarray(values[state], dtype=float) - averages)
    ph.averages = np.asarray(averages, dtype=float)
    ph.iteration += 1
    return ph

def multiplier_imbalance(ph: PhState) -> float:
    """Largest |sum over actors| of the multipliers, zero when the updates are balanced"""
    if not ph.multipliers:
        return 0.0
    total = np.sum([ph.multipliers[s] for s in ph.actors], axis=0)
    return float(np.max(np.abs(total), initial=0.0))

def add_proximal_penalty(
    program: ConicProgram,
    var: Variable,
    multiplier: float,
    mean: float,
    rho: float,
    lower: float,
    upper: float,
    breakpoints: int = 8,
    weight: float = 1.0,
    name: str = 'q',
) -> LinExpr:
    """m*x + weight*(rho/2)*(x - mean)^2, the square replaced by its chord interpolation

    Chords join (b, b^2) at breakpoints spread evenly over [-R, R] with R the farthest bound
    from the mean; q above every chord line is exact at the breakpoints.
    """
    penalty = var * multiplier
    scale = weight * rho / 2.0
    if scale == 0:
        return penalty
    if not (math.isfinite(lower) and math.isfinite(upper)):
        raise HedgingError(f"hedged variable `{var.name}` needs finite bounds for the proximal term")
    radius = max(upper - mean, mean - lower, 1e-9)
    points = np.linspace(-radius, radius, breakpoints + 1)
    q = program.add_variable(name, 0.0, math.inf)
    for k, (a, b) in enumerate(zip(points[:-1], points[1:])):
        program.add_constraint(q, '>=', (var - mean) * float(a + b) - float(a * b), name=f"{name}_chord{k}")
    return penalty + q * scale



## Subproblems
##############

def _rival_capacity(grid: GridModel, state: str, plans: dict[str, Plan] | None) -> dict[str, float]:
    """Investments of the other leaders from their last plans; zero before any plan exists"""
    rivals: dict[str, float] = {}
    for gen in grid.candidate_gens:
        owner = grid.state_of(gen)
        if owner == state:
            continue
        plan = (plans or {}).get(owner)
        rivals[gen.id] = plan.investment.get(gen.id, 0.0) if plan is not None else 0.0
    return rivals

def _solve_actor(
    grid: GridModel,
    policies: PolicySet,
    state: str,
    options: PhOptions,
    rivals: dict[str, float],
    ph: PhState | None,
    iteration: int,
) -> ActorSolve:
    started = time.perf_counter()
    inst = build_mpec(grid, policies, state, rivals, options.mpec)
    if ph is not None and ph.averages is not None:
        terms = []
        for index, key in enumerate(inst.hedge_keys):
            lower, upper = inst.hedge_bounds[key]
            terms.append(add_proximal_penalty(
                inst.program, inst.hedge_vars[key], float(ph.multipliers[state][index]), float(ph.averages[index]),
                float(ph.rho[index]), lower, upper, options.breakpoints, options.quadratic_weight, name=var_name('q', *key),
            ))
        inst.program.set_objective(inst.base_objective - LinExpr.sum(terms), 'max')

    result = solve(inst.program, options.solver, options.backend)
    if not result.has_solution:
        raise HedgingError(f"subproblem ended `{result.status}` without a solution", actor=state, iteration=iteration, status=result.status)
    plan = extract_plan(inst, result, kind='epec', scenario=options.scenario)
    values = np.array(inst.hedge_values(result))
    wall = time.perf_counter() - started
    logger.debug("%s: round %d solved in %.2fs, status %s", state, iteration, wall, result.status)
    return ActorSolve(state, inst, result, plan, values, wall)

def available_cpus() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1

def worker_count(jobs: int | None, actors: int) -> int:
    """Threads for one round: `jobs` or the available CPUs, at most one per actor"""
    return max(1, min(jobs or available_cpus(), actors))

def _solve_round(
    ph: PhState,
    grid: GridModel,
    policies: PolicySet,
    options: PhOptions,
    previous: dict[str, Plan] | None,
    penalized: bool,
) -> dict[str, ActorSolve]:
    iteration = len(ph.history) + 1
    with ThreadPoolExecutor(max_workers=worker_count(options.jobs, len(ph.actors))) as pool:
        futures = {
            state: pool.submit(_solve_actor, grid, policies, state, options, _rival_capacity(grid, state, previous), ph if penalized else None, iteration)
            for state in ph.actors
        }
        return {state: futures[state].result() for state in ph.actors}

def initial_solve(ph: PhState, grid: GridModel, policies: PolicySet, options: PhOptions | None = None) -> dict[str, ActorSolve]:
    """Unpenalized MPEC of every actor with rival candidates at zero capacity"""
    return _solve_round(ph, grid, policies, options or PhOptions(), None, penalized=False)

def augment_and_solve(
    ph: PhState,
    state: str,
    grid: GridModel,
    policies: PolicySet,
    options: PhOptions | None = None,
    previous: dict[str, Plan] | None = None,
) -> ActorSolve:
    """One actor's MPEC with the multiplier and proximal terms of the current state"""
    if ph.averages is None:
        raise HedgingError("no consensus averages yet", actor=state, iteration=ph.iteration)
    return _solve_actor(grid, policies, state, options or PhOptions(), _rival_capacity(grid, state, previous), ph, len(ph.history) + 1)



## Driver
#########

def run_ph(actors: list[str], grid: GridModel, policies: PolicySet, options: PhOptions | None = None) -> EquilibriumResult:
    options = options or PhOptions()
    ph = ph_initialize(actors, grid, options)
    history: list[PhIteration] = []

    started = time.perf_counter()
    solves = initial_solve(ph, grid, policies, options)
    while True:
        values = {state: solves[state].values for state in ph.actors}
        averages = consensus_average(values)
        tolerance = compute_tolerance(values, averages)
        ph.history.append(tolerance)
        record = PhIteration(
            len(ph.history), tolerance,
            {state: solves[state].plan.objectives[state] for state in ph.actors},
            time.perf_counter() - started,
            {state: solves[state].wall_time for state in ph.actors},
            multiplier_imbalance(ph),
        )
        history.append(record)
        logger.info("round %d: tolerance %.6g, objectives %s", record.iteration, tolerance, record.objectives)

        converged = tolerance <= options.tolerance
        if converged or len(ph.history) >= options.max_iter:
            break
        update_multipliers(ph, values, averages)
        started = time.perf_counter()
        previous = {state: solves[state].plan for state in ph.actors}
        solves = _solve_round(ph, grid, policies, options, previous, penalized=True)

    if not converged:
        logger.warning("no consensus after %d rounds (tolerance %.6g > %.6g)", len(ph.history), tolerance, options.tolerance)
    plans = {state: solves[state].plan for state in ph.actors}
    consensus = dict(zip(ph.keys, (float(v) for v in averages)))
    return EquilibriumResult(
        converged, len(ph.history), tolerance, combine_plans(grid, plans, consensus, options.scenario), plans, consensus, history,
    )

def combine_plans(grid: GridModel, plans: dict[str, Plan], consensus: dict[HedgeKey, float], scenario: str = 'basecase') -> Plan:
    """One plan over all leaders: own decisions of each actor, consensus dispatch and prices"""
    data = {
        'kind': 'epec',
        'scenario': scenario,
        'states': list(plans),
        'status': 'optimal' if all(p.status == 'optimal' for p in plans.values()) else 'gap_limit',
        'objective': math.fsum(p.objectives[s] for s, p in plans.items()),
        'objectives': {s: p.objectives[s] for s, p in plans.items()},
        'chance_constrained': all(p.chance_constrained for p in plans.values()),
        'investment': {}, 'expected_dispatch': {}, 'imports': {},
        'dispatch': {}, 'flows': {}, 'angles': {}, 'prices': {},
    }
    for state, plan in plans.items():
        own = {g.id for g in grid.gens_in_state(state, candidates=True)}
        data['investment'].update({g: v for g, v in plan.investment.items() if g in own})
        data['expected_dispatch'].update(plan.expected_dispatch)
        data['imports'].update(plan.imports)
    for gen in grid.candidate_gens:
        data['investment'].setdefault(gen.id, 0.0)
    for (family, item, day, t), value in consensus.items():
        target = data['dispatch'] if family == 'g' else data['prices']
        target[plan_key(item, day, t)] = value
    for series in ('flows', 'angles'):
        keys = getattr(next(iter(plans.values())), series).keys()
        for key in keys:
            data[series][key] = float(np.mean([getattr(p, series)[key] for p in plans.values()]))
    return Plan(**data)



## Tables
#########

def convergence_table(result: EquilibriumResult) -> pd.DataFrame:
    """Tolerance and per-actor objective per round"""
    rows = []
    for record in result.history:
        row = {'iteration': record.iteration, 'tolerance': record.tolerance, 'multiplier_sum': record.multiplier_sum}
        row.update({f"objective_{s}": v for s, v in record.objectives.items()})
        rows.append(row)
    return pd.DataFrame(rows)

def timing_table(result: EquilibriumResult) -> pd.DataFrame:
    rows = []
    for record in result.history:
        for state, seconds in record.actor_times.items():
            rows.append({'iteration': record.iteration, 'state': state, 'wall_time': seconds})
        rows.append({'iteration': record.iteration, 'state': 'total', 'wall_time': record.wall_time})
    return pd.DataFrame(rows, columns=['iteration', 'state', 'wall_time'])
