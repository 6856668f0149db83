"""Centralized planning benchmark: one planner builds and dispatches for every state at once

A single LP over all states with spinning-reserve headroom, per-state RPS and budgets and the
shared DC network. No strategic offers, hence no complementarity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math

import pandas as pd

from .conic_program import ConicProgram, LinExpr, SolveResult, Variable, var_name
from .errors import BenchmarkError, ScenarioMismatchError
from .grid_model import CandidateGenerator, GridModel, PolicySet
from .market import check_islands, reference_nodes
from .plan import Plan, expansion_summary, plan_key
from .solver import SolverOptions, solve
from .uncertainty import build_affine_policy, build_soc_constraints, normal_quantile

logger = logging.getLogger(__name__)

Reserve = dict[tuple[str, int], float]



def default_reserve_requirement(grid: GridModel, eta: float = 0.03) -> Reserve:
    """z_(1-eta) times the stdev of the aggregate forecast error of existing renewables"""
    z = normal_quantile(1.0 - eta)
    reserve: Reserve = {}
    for day in grid.day_ids:
        for t in range(grid.hours):
            stdev = math.hypot(*(g.g_max * grid.sigma(g, day, t) for g in grid.existing_gens if g.kind == 'renewable'))
            reserve[(day, t)] = z * stdev
    return reserve

def _check_reserve(grid: GridModel, reserve: Reserve) -> None:
    headroom = math.fsum(g.g_max for g in grid.all_gens if g.kind == 'controllable')
    for (day, t), value in reserve.items():
        if value < 0:
            raise BenchmarkError(f"reserve requirement on `{day}` hour {t} is negative ({value})")
        if value > headroom:
            raise BenchmarkError(
                f"reserve requirement {value:.3f} MW on `{day}` hour {t} exceeds the {headroom:.3f} MW "
                f"of controllable capacity that could ever be built"
            )



@dataclass
class BenchmarkInstance:
    program: ConicProgram
    grid: GridModel
    policies: PolicySet
    reserve: Reserve
    capacity: dict[str, Variable] = field(default_factory=dict)
    g: dict[tuple[str, str, int], Variable] = field(default_factory=dict)
    r: dict[tuple[str, str, int], Variable] = field(default_factory=dict)
    f: dict[tuple[str, str, int], Variable] = field(default_factory=dict)
    theta: dict[tuple[str, str, int], Variable] = field(default_factory=dict)

def build_benchmark(
    grid: GridModel,
    policies: PolicySet,
    reserve: Reserve | None = None,
    use_chance_constraints: bool = False,
) -> BenchmarkInstance:
    """Joint expansion LP of all states; ramping is not modelled"""
    policies.check_grid(grid)
    reserve = default_reserve_requirement(grid) if reserve is None else dict(reserve)
    _check_reserve(grid, reserve)
    refs = reference_nodes(grid)
    program = ConicProgram('benchmark')
    inst = BenchmarkInstance(program, grid, policies, reserve)

    for gen in grid.candidate_gens:
        inst.capacity[gen.id] = program.add_variable(var_name('cap', gen.id), 0.0, gen.g_max)

    for day in grid.day_ids:
        check_islands(grid, day)
        for t in range(grid.hours):
            for gen in grid.all_gens:
                key = (gen.id, day, t)
                inst.g[key] = program.add_variable(var_name('g', *key), 0.0, math.inf)
                if gen.kind == 'controllable':
                    inst.r[key] = program.add_variable(var_name('r', *key), 0.0, math.inf)
            for line in grid.lines:
                inst.f[(line.id, day, t)] = program.add_variable(var_name('f', line.id, day, t), -line.capacity, line.capacity)
            for node in grid.node_ids:
                lb, ub = (0.0, 0.0) if node in refs else (-math.inf, math.inf)
                inst.theta[(node, day, t)] = program.add_variable(var_name('theta', node, day, t), lb, ub)

    for day in grid.day_ids:
        for t in range(grid.hours):
            _add_hour(inst, day, t)
    _add_state_rows(inst)
    if use_chance_constraints:
        for state in grid.states:
            build_soc_constraints(
                program, grid, state, build_affine_policy(grid, state), inst.capacity,
                {k: v for k, v in inst.g.items() if grid.gen(k[0]).kind == 'controllable' and grid.state_of(k[0]) == state},
                policies.policy(state).security, prefix='cc',
            )

    program.set_objective(_system_welfare(inst), 'max')
    logger.info("benchmark: %r", program)
    return inst

def _add_hour(inst: BenchmarkInstance, day: str, t: int) -> None:
    grid, program = inst.grid, inst.program
    for gen in grid.all_gens:
        key = (gen.id, day, t)
        g = inst.g[key]
        cap = inst.capacity[gen.id] if isinstance(gen, CandidateGenerator) else gen.g_max
        if gen.kind == 'renewable':
            program.add_constraint(g - cap * grid.rho(gen, day, t), '<=', 0.0, name=var_name('avail', *key))
            continue
        program.add_constraint(g + inst.r[key] - cap, '<=', 0.0, name=var_name('headroom', *key))
        floor = cap * gen.min_output if isinstance(gen, CandidateGenerator) else gen.g_min
        program.add_constraint(g - floor, '>=', 0.0, name=var_name('floor', *key))
    program.add_constraint(
        LinExpr.sum(inst.r[(g.id, day, t)] for g in grid.all_gens if g.kind == 'controllable'),
        '>=', inst.reserve.get((day, t), 0.0), name=var_name('reserve', day, t),
    )
    for node in grid.node_ids:
        injection = LinExpr.sum(inst.g[(g.id, day, t)] for g in grid.gens_at_node(node))
        for line in grid.lines:
            if line.to_node == node:
                injection = injection + inst.f[(line.id, day, t)]
            if line.from_node == node:
                injection = injection - inst.f[(line.id, day, t)]
        program.add_constraint(injection, '==', grid.demand_at(day, node, t), name=var_name('balance', node, day, t))
    for line in grid.lines:
        angle = (inst.theta[(line.from_node, day, t)] - inst.theta[(line.to_node, day, t)]) / line.reactance
        program.add_constraint(inst.f[(line.id, day, t)] - angle, '==', 0.0, name=var_name('flowdef', line.id, day, t))

def _state_renewables(inst: BenchmarkInstance, state: str, day: str) -> LinExpr:
    grid = inst.grid
    return LinExpr.sum(inst.g[(g.id, day, t)] for g in grid.gens_in_state(state, 'renewable') for t in range(grid.hours))

def _add_state_rows(inst: BenchmarkInstance) -> None:
    grid, program, policies = inst.grid, inst.program, inst.policies
    for state in grid.states:
        policy = policies.policy(state)
        candidates = grid.gens_in_state(state, candidates=True)
        for day in grid.day_ids:
            if policy.rps > 0:
                program.add_constraint(_state_renewables(inst, state, day), '>=', policy.rps * grid.state_demand(state, day), name=var_name('rps', state, day))
            if policy.policy_budget is not None:
                payments = _state_renewables(inst, state, day) * policy.feed_in_tariff + LinExpr.sum(
                    inst.capacity[g.id] * policies.capacity_tariff(state) for g in candidates if g.kind == 'renewable'
                )
                program.add_constraint(payments, '<=', policy.policy_budget, name=var_name('polbudget', state, day))
        if policy.capital_budget is not None:
            spend = LinExpr.sum(inst.capacity[g.id] * policies.capital_cost(g) for g in candidates)
            program.add_constraint(spend, '<=', policy.capital_budget, name=var_name('capbudget', state))

def _system_welfare(inst: BenchmarkInstance) -> LinExpr:
    grid, policies = inst.grid, inst.policies
    terms: list[LinExpr | float] = []
    for day in grid.day_ids:
        weight = grid.probability(day)
        for t in range(grid.hours):
            for node in grid.node_ids:
                policy = policies.policy(grid.state_of_node(node))
                terms.append(weight * policy.retail_price(node, t) * grid.demand_at(day, node, t))
            for gen in grid.all_gens:
                cost = gen.cost
                if gen.kind == 'renewable':
                    cost += policies.policy(grid.state_of(gen)).feed_in_tariff
                terms.append(inst.g[(gen.id, day, t)] * (-weight * cost))
    for gen in grid.candidate_gens:
        charge = policies.capital_cost(gen)
        if gen.kind == 'renewable':
            charge += policies.capacity_tariff(grid.state_of(gen))
        terms.append(inst.capacity[gen.id] * -charge)
    return LinExpr.sum(terms)



def solve_benchmark(
    grid: GridModel,
    policies: PolicySet,
    reserve: Reserve | None = None,
    options: SolverOptions | None = None,
    backend: str = 'builtin',
    use_chance_constraints: bool = False,
    scenario: str = 'basecase',
) -> tuple[BenchmarkInstance, SolveResult, Plan | None]:
    inst = build_benchmark(grid, policies, reserve, use_chance_constraints)
    result = solve(inst.program, options, backend)
    logger.info("benchmark: %s, objective %s", result.status, result.objective)
    if not result.has_solution:
        return inst, result, None
    return inst, result, extract_benchmark_plan(inst, result, scenario, use_chance_constraints)

def extract_benchmark_plan(inst: BenchmarkInstance, result: SolveResult, scenario: str = 'basecase', chance_constrained: bool = False) -> Plan:
    grid = inst.grid
    dispatch = {plan_key(*k): result.value(v) for k, v in inst.g.items()}
    prices = {}
    if result.duals:
        for node in grid.node_ids:
            for day in grid.day_ids:
                for t in range(grid.hours):
                    prices[plan_key(node, day, t)] = -result.dual(var_name('balance', node, day, t)) / grid.probability(day)
    return Plan(
        kind='benchmark',
        scenario=scenario,
        states=grid.states,
        status=result.status,
        objective=float(result.objective),
        chance_constrained=chance_constrained,
        investment={gen: max(0.0, result.value(var)) for gen, var in inst.capacity.items()},
        expected_dispatch=dispatch,
        dispatch=dispatch,
        flows={plan_key(*k): result.value(v) for k, v in inst.f.items()},
        angles={plan_key(*k): result.value(v) for k, v in inst.theta.items()},
        prices=prices,
    )

def compare_expansion(plan: Plan, benchmark: Plan, grid: GridModel) -> pd.DataFrame:
    """Capacity built in `plan` minus the benchmark's, GW per state of `plan`"""
    if plan.scenario != benchmark.scenario:
        raise ScenarioMismatchError(f"plan scenario `{plan.scenario}` differs from benchmark scenario `{benchmark.scenario}`")
    missing = [s for s in plan.states if s not in benchmark.states]
    if missing:
        raise ScenarioMismatchError(f"benchmark has no results for states {missing}")
    ours = expansion_summary(plan, grid).set_index('state')
    theirs = expansion_summary(benchmark, grid).set_index('state')
    rows = []
    for state in plan.states:
        rows.append({
            'state': state,
            'delta_controllable_gw': ours.at[state, 'controllable_gw'] - theirs.at[state, 'controllable_gw'],
            'delta_renewable_gw': ours.at[state, 'renewable_gw'] - theirs.at[state, 'renewable_gw'],
        })
    return pd.DataFrame(rows, columns=['state', 'delta_controllable_gw', 'delta_renewable_gw'])
