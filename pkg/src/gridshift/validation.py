"""Checks that look at solutions from outside the models that produced them"""

from __future__ import annotations

import logging
import math

import numpy as np
import pandas as pd

from .conic_program import var_name
from .errors import UncertaintyError
from .grid_model import CandidateGenerator, GridModel, PolicySet
from .market import build_kkt_system, build_market_lp, extract_market_solution, kkt_solution, solve_market, verify_kkt_point
from .plan import Plan, plan_key
from .solver import SolverOptions, solve
from .uncertainty import AffinePolicy, build_affine_policy, chance_margins, sample_errors

logger = logging.getLogger(__name__)

Z_95 = 1.959963984540054
MIN_SAMPLES = 10_000



## Chance constraints
#####################

def monte_carlo_cc_check(
    grid: GridModel,
    plan: Plan,
    eta: float | dict[str, float] = 0.03,
    n: int = 100_000,
    seed: int = 0,
    participation: dict[str, float] | None = None,
    bound_tol: float = 1e-7,
) -> dict:
    """Empirical violation rate of every generation bound under sampled forecast errors

    Each controllable follows g = gbar - alpha * sum(errors of its state's renewables). Rates come
    with normal-approximation 95% intervals. `eta` is one risk level or one per state; a bound passes
    while the low end of its interval stays within its state's level.
    """
    if n < MIN_SAMPLES:
        raise UncertaintyError(f"monte carlo needs at least {MIN_SAMPLES} samples, got {n}")
    levels = eta if isinstance(eta, dict) else {state: eta for state in plan.states}
    missing = [s for s in plan.states if s not in levels]
    if missing:
        raise UncertaintyError(f"no risk level for {', '.join(missing)}")
    entries = []
    for state in plan.states:
        policy = build_affine_policy(grid, state, participation)
        for day in grid.day_ids:
            _, samples = sample_errors(grid, day, seed, n, state, plan.investment)
            total = samples.sum(axis=2)
            for gen in grid.gens_in_state(state, 'controllable'):
                if isinstance(gen, CandidateGenerator):
                    upper = plan.investment.get(gen.id, 0.0)
                    lower = gen.min_output * upper
                else:
                    upper, lower = gen.g_max, gen.g_min
                alpha = policy.of(gen.id)
                for t in range(grid.hours):
                    gbar = plan.expected_dispatch[plan_key(gen.id, day, t)]
                    g = gbar - alpha * total[:, t]
                    for side, violated in (('upper', g > upper + bound_tol), ('lower', g < lower - bound_tol)):
                        rate = float(np.count_nonzero(violated)) / n
                        half = Z_95 * math.sqrt(rate * (1.0 - rate) / n)
                        entries.append({
                            'state': state, 'gen': gen.id, 'day': day, 'hour': t, 'side': side,
                            'eta': levels[state],
                            'rate': rate, 'ci_low': max(0.0, rate - half), 'ci_high': min(1.0, rate + half),
                        })
    max_rate = max((e['rate'] for e in entries), default=0.0)
    logger.info("monte carlo: %d bounds, n=%d, max violation rate %.5f (eta %s)", len(entries), n, max_rate, eta)
    return {
        'n': n,
        'seed': seed,
        'eta': eta,
        'max_rate': max_rate,
        'entries': entries,
        'passed': all(e['ci_low'] <= e['eta'] for e in entries),
    }



## Market oracle
################

def lp_vs_kkt_equivalence(
    grid: GridModel,
    offers: dict[tuple[str, str, int], float],
    day: str,
    tol: float = 1e-6,
    options: SolverOptions | None = None,
) -> dict:
    """Solve the market LP directly and its KKT system as a feasibility search, then compare"""
    mlp = build_market_lp(grid, offers, day)
    lp = extract_market_solution(mlp, solve_market(mlp, options))
    system = build_kkt_system(mlp)
    result = solve(system.program, options)
    kkt = kkt_solution(system, grid, result)

    objective_gap = abs(lp.objective - kkt.objective) / max(1.0, abs(lp.objective))
    price_diff = max((abs(lp.prices[k] - kkt.prices[k]) / max(1.0, abs(lp.prices[k])) for k in lp.prices), default=0.0)
    dispatch_diff = max((abs(lp.dispatch[k] - kkt.dispatch[k]) for k in lp.dispatch), default=0.0)
    check = verify_kkt_point(mlp, kkt, tol=max(tol, 1e-6))
    report = {
        'day': day,
        'tol': tol,
        'objective_lp': lp.objective,
        'objective_kkt': kkt.objective,
        'objective_gap': objective_gap,
        'price_diff': price_diff,
        'dispatch_diff': dispatch_diff,
        'kkt_residuals': check['residuals'],
        'objectives_match': objective_gap <= tol,
        'prices_match': price_diff <= tol,
    }
    report['passed'] = report['objectives_match'] and report['prices_match'] and check['passed']
    logger.info("%s: LP %.6g vs KKT %.6g, price diff %.3g", day, lp.objective, kkt.objective, price_diff)
    return report



## Plan audit
#############

def _family(residual: float, tol: float, detail: str = '', skipped: bool = False) -> dict:
    return {'residual': residual, 'passed': skipped or residual <= tol, 'detail': detail, 'skipped': skipped}

def _worst(current: tuple[float, str], residual: float, where: str) -> tuple[float, str]:
    return (residual, where) if residual > current[0] else current

def audit_solution(
    grid: GridModel,
    plan: Plan,
    policies: PolicySet,
    tol: float = 1e-6,
    participation: dict[str, float] | None = None,
) -> dict:
    """Scaled residual of every constraint family of a plan

    Residuals are violations divided by max(1, |reference|), the reference being the demand, line
    capacity, target or budget the row is measured against.
    """
    families = {
        'balance': _audit_balance(grid, plan),
        'flows': _audit_flows(grid, plan),
        'rps': _audit_rps(grid, plan, policies),
        'budgets': _audit_budgets(grid, plan, policies),
        'ramping': _audit_ramping(grid, plan),
        'cones': _audit_cones(grid, plan, policies, participation),
    }
    report = {'kind': plan.kind, 'states': plan.states, 'tol': tol, 'families': {}}
    for name, (residual, where, skipped) in families.items():
        report['families'][name] = _family(residual, tol, where, skipped)
    report['passed'] = all(f['passed'] for f in report['families'].values())
    if not report['passed']:
        failed = [name for name, f in report['families'].items() if not f['passed']]
        logger.warning("audit of %s plan failed: %s", plan.kind, failed)
    return report

def _audit_balance(grid: GridModel, plan: Plan) -> tuple[float, str, bool]:
    worst = (0.0, '')
    if plan.dispatch:
        for day in grid.day_ids:
            for t in range(grid.hours):
                for node in grid.node_ids:
                    injection = math.fsum(plan.dispatch.get(plan_key(g.id, day, t), 0.0) for g in grid.gens_at_node(node))
                    for line in grid.lines:
                        flow = plan.flows.get(plan_key(line.id, day, t), 0.0)
                        if line.to_node == node:
                            injection += flow
                        if line.from_node == node:
                            injection -= flow
                    demand = grid.demand_at(day, node, t)
                    worst = _worst(worst, abs(injection - demand) / max(1.0, abs(demand)), var_name('balance', node, day, t))
    if plan.imports:
        for key, imported in plan.imports.items():
            node, day, t = key.split('|')
            t = int(t)
            supply = math.fsum(plan.expected_dispatch.get(plan_key(g.id, day, t), 0.0) for g in grid.gens_at_node(node))
            demand = grid.demand_at(day, node, t)
            worst = _worst(worst, abs(supply + imported - demand) / max(1.0, abs(demand)), var_name('zonal', node, day, t))
    return worst[0], worst[1], not (plan.dispatch or plan.imports)

def _audit_flows(grid: GridModel, plan: Plan) -> tuple[float, str, bool]:
    worst = (0.0, '')
    if not plan.flows:
        return 0.0, '', True
    for day in grid.day_ids:
        for t in range(grid.hours):
            for line in grid.lines:
                f = plan.flows[plan_key(line.id, day, t)]
                angle = (plan.angles.get(plan_key(line.from_node, day, t), 0.0) - plan.angles.get(plan_key(line.to_node, day, t), 0.0)) / line.reactance
                scale = max(1.0, line.capacity)
                worst = _worst(worst, abs(f - angle) / scale, var_name('flowdef', line.id, day, t))
                worst = _worst(worst, max(0.0, abs(f) - line.capacity) / scale, var_name('flowlimit', line.id, day, t))
    return worst[0], worst[1], False

def _renewable_output(grid: GridModel, plan: Plan, state: str, day: str, biased: bool) -> float:
    total = 0.0
    for gen in grid.gens_in_state(state, 'renewable'):
        cap = plan.capacity(grid, gen.id)
        for t in range(grid.hours):
            total += plan.expected_dispatch.get(plan_key(gen.id, day, t), 0.0)
            if biased:
                total += cap * grid.upsilon(gen, day, t)
    return total

def _audit_rps(grid: GridModel, plan: Plan, policies: PolicySet) -> tuple[float, str, bool]:
    worst = (0.0, '')
    for state in plan.states:
        policy = policies.policy(state)
        if policy.rps <= 0:
            continue
        for day in grid.day_ids:
            required = policy.rps * grid.state_demand(state, day)
            shortfall = max(0.0, required - _renewable_output(grid, plan, state, day, biased=False))
            worst = _worst(worst, shortfall / max(1.0, required), f"{var_name('rps', state, day)} short {shortfall:.6g} MWh")
    return worst[0], worst[1], False

def _audit_budgets(grid: GridModel, plan: Plan, policies: PolicySet) -> tuple[float, str, bool]:
    worst = (0.0, '')
    biased = plan.kind != 'benchmark'
    for state in plan.states:
        policy = policies.policy(state)
        candidates = grid.gens_in_state(state, candidates=True)
        if policy.capital_budget is not None:
            spend = math.fsum(policies.capital_cost(g) * plan.investment.get(g.id, 0.0) for g in candidates)
            over = max(0.0, spend - policy.capital_budget)
            worst = _worst(worst, over / max(1.0, policy.capital_budget), var_name('capbudget', state))
        if policy.policy_budget is not None:
            capacity = math.fsum(policies.capacity_tariff(state) * plan.investment.get(g.id, 0.0) for g in candidates if g.kind == 'renewable')
            for day in grid.day_ids:
                paid = policy.feed_in_tariff * _renewable_output(grid, plan, state, day, biased) + capacity
                over = max(0.0, paid - policy.policy_budget)
                worst = _worst(worst, over / max(1.0, policy.policy_budget), var_name('polbudget', state, day))
    return worst[0], worst[1], False

def _audit_ramping(grid: GridModel, plan: Plan) -> tuple[float, str, bool]:
    if plan.kind == 'benchmark':
        return 0.0, 'not modelled by the benchmark', True
    worst = (0.0, '')
    for state in plan.states:
        for gen in grid.gens_in_state(state, 'controllable'):
            for day in grid.day_ids:
                for t in range(1, grid.hours):
                    step = plan.expected_dispatch[plan_key(gen.id, day, t)] - plan.expected_dispatch[plan_key(gen.id, day, t - 1)]
                    if gen.ramp_up is not None:
                        worst = _worst(worst, max(0.0, step - gen.ramp_up) / max(1.0, gen.ramp_up), var_name('rampup', gen.id, day, t))
                    if gen.ramp_down is not None:
                        worst = _worst(worst, max(0.0, -step - gen.ramp_down) / max(1.0, gen.ramp_down), var_name('rampdown', gen.id, day, t))
    return worst[0], worst[1], False

def _audit_cones(grid: GridModel, plan: Plan, policies: PolicySet, participation: dict[str, float] | None) -> tuple[float, str, bool]:
    worst = (0.0, '')
    for state in plan.states:
        policy = build_affine_policy(grid, state, participation) if plan.chance_constrained else AffinePolicy(state, {})
        dispatch = {}
        for gen in grid.gens_in_state(state, 'controllable'):
            for day in grid.day_ids:
                for t in range(grid.hours):
                    dispatch[(gen.id, day, t)] = plan.expected_dispatch[plan_key(gen.id, day, t)]
        margins = chance_margins(grid, state, policy, plan.investment, dispatch, policies.policy(state).security)
        for row in margins:
            residual = max(0.0, -row['margin']) / max(1.0, row['norm'], abs(row['y']))
            worst = _worst(worst, residual, f"{row['side']} bound of {row['gen']} on {row['day']} hour {row['hour']}")
    return worst[0], worst[1], False



## Reporting
############

def format_report(report: dict) -> str:
    """Plain-text table of an audit, equivalence or Monte Carlo report"""
    if 'families' in report:
        rows = [
            {'family': name, 'residual': f"{f['residual']:.3e}", 'status': 'skipped' if f['skipped'] else ('ok' if f['passed'] else 'FAIL'), 'worst': f['detail']}
            for name, f in report['families'].items()
        ]
        title = f"audit of {report['kind']} plan for {', '.join(report['states'])}"
    elif 'entries' in report:
        worst = sorted(report['entries'], key=lambda e: -e['rate'])[:10]
        rows = [
            {'bound': f"{e['side']} {e['gen']} {e['day']} h{e['hour']}", 'rate': f"{e['rate']:.5f}", 'ci': f"[{e['ci_low']:.5f}, {e['ci_high']:.5f}]"}
            for e in worst
        ]
        eta = report['eta']
        if isinstance(eta, dict):
            eta = ','.join(f"{s}:{v}" for s, v in eta.items())
        title = f"monte carlo n={report['n']} seed={report['seed']} eta={eta}: max rate {report['max_rate']:.5f}"
    else:
        rows = [{'check': k, 'value': v} for k, v in report.items() if not isinstance(v, dict)]
        title = f"LP vs KKT on {report.get('day', '?')}"
    status = 'PASSED' if report.get('passed') else 'FAILED'
    table = pd.DataFrame(rows).to_string(index=False) if rows else '(empty)'
    return f"{title}: {status}\n{table}"
