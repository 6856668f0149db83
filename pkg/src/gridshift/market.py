"""Wholesale market clearing on a DC network and its KKT conditions

The market of one representative day maximizes -sum C_i g_i subject to

    balance(n,t):   sum_{i at n} g + sum_{l into n} f - sum_{l out of n} f = D     dual -lambda
    flowdef(l,t):   f - (theta_o - theta_r) / X = 0                                   dual -xi
    gmin(i,t):      g >= 0                                                            dual -gamma_lo
    gmax(i,t):      g <= offer                                                        dual  gamma_hi
    fmin(l,t):      f >= -F                                                           dual -delta_lo
    fmax(l,t):      f <= F                                                            dual  delta_hi

with theta fixed to 0 at the lowest-index node of every connected component. Program duals are
d(objective)/d(rhs), so the market quantities above follow by the listed signs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .conic_program import ConicProgram, LinExpr, SolveResult, Variable, as_expr, var_name
from .errors import MarketError
from .grid_model import CandidateGenerator, GridModel
from .solver import SolverOptions, solve_lp

logger = logging.getLogger(__name__)

Offers = dict[tuple[str, str, int], float]



## Offers
#########

def build_offers(
    grid: GridModel,
    state: str | None,
    expected_dispatch: dict[tuple[str, str, int], float | LinExpr | Variable],
    rival_capacity: dict[str, float] | None = None,
) -> dict[tuple[str, str, int], float | LinExpr | Variable]:
    """Offer quantity per (generator, day, hour)

    Generators of `state` offer their expected dispatch; all others offer rho * capacity minus
    their withheld reserve, clipped at 0. Rival candidates use `rival_capacity` (0 when absent).
    """
    rival_capacity = rival_capacity or {}
    offers: dict[tuple[str, str, int], float | LinExpr | Variable] = {}
    for gen in grid.all_gens:
        own = state is not None and grid.state_of(gen) == state
        cap = rival_capacity.get(gen.id, 0.0) if isinstance(gen, CandidateGenerator) else gen.g_max
        for day in grid.day_ids:
            for t in range(grid.hours):
                key = (gen.id, day, t)
                if own:
                    if key not in expected_dispatch:
                        raise MarketError(f"no expected dispatch for own generator `{gen.id}` on `{day}` hour {t}")
                    offers[key] = expected_dispatch[key]
                else:
                    offers[key] = max(0.0, grid.rho(gen, day, t) * cap - gen.reserve)
    return offers



## Network helpers
##################

def reference_nodes(grid: GridModel) -> list[str]:
    """Lowest-index node of every connected component"""
    labels = component_labels(grid)
    refs: dict[int, str] = {}
    for node in grid.node_ids:
        refs.setdefault(labels[grid.node_index[node]], node)
    return list(refs.values())

def component_labels(grid: GridModel) -> np.ndarray:
    n = len(grid.nodes)
    rows = [grid.node_index[l.from_node] for l in grid.lines]
    cols = [grid.node_index[l.to_node] for l in grid.lines]
    adjacency = sp.csr_matrix((np.ones(len(rows)), (np.array(rows, dtype=int), np.array(cols, dtype=int))), shape=(n, n))
    _, labels = connected_components(adjacency, directed=False)
    return labels

def check_islands(grid: GridModel, day: str) -> None:
    """Reject components that carry demand but host no generator"""
    labels = component_labels(grid)
    has_gen = {labels[grid.node_index[g.node]] for g in grid.all_gens}
    for node in grid.node_ids:
        label = labels[grid.node_index[node]]
        if label in has_gen:
            continue
        if any(grid.demand_at(day, node, t) > 0 for t in range(grid.hours)):
            raise MarketError(f"node `{node}` has demand on `{day}` but its network island has no generator")

def theta_bound(grid: GridModel) -> float:
    """Largest angle difference any path can carry"""
    return max(1.0, math.fsum(l.capacity * l.reactance for l in grid.lines))



## Market LP
############

@dataclass
class MarketLp:
    program: ConicProgram
    grid: GridModel
    day: str
    offers: dict[tuple[str, str, int], float]
    g: dict[tuple[str, int], Variable] = field(default_factory=dict)
    f: dict[tuple[str, int], Variable] = field(default_factory=dict)
    theta: dict[tuple[str, int], Variable] = field(default_factory=dict)
    ref_nodes: list[str] = field(default_factory=list)

    def row(self, family: str, *keys) -> str:
        return var_name(family, *keys)

def build_market_lp(grid: GridModel, offers: dict[tuple[str, str, int], float], day: str) -> MarketLp:
    if day not in grid.day_ids:
        raise MarketError(f"unknown representative day `{day}`")
    check_islands(grid, day)
    refs = reference_nodes(grid)
    day_offers: dict[tuple[str, str, int], float] = {}
    for gen in grid.all_gens:
        for t in range(grid.hours):
            key = (gen.id, day, t)
            if key not in offers:
                raise MarketError(f"no offer for `{gen.id}` on `{day}` hour {t}")
            value = float(offers[key])
            if value < 0:
                raise MarketError(f"offer of `{gen.id}` on `{day}` hour {t} is negative ({value})")
            day_offers[key] = value

    program = ConicProgram(f"market_{day}")
    mlp = MarketLp(program, grid, day, day_offers, ref_nodes=refs)
    for t in range(grid.hours):
        for gen in grid.all_gens:
            mlp.g[(gen.id, t)] = program.add_variable(var_name('g', gen.id, t), -math.inf, math.inf)
        for line in grid.lines:
            mlp.f[(line.id, t)] = program.add_variable(var_name('f', line.id, t), -math.inf, math.inf)
        for node in grid.node_ids:
            if node in refs:
                mlp.theta[(node, t)] = program.add_variable(var_name('theta', node, t), 0.0, 0.0)
            else:
                mlp.theta[(node, t)] = program.add_variable(var_name('theta', node, t), -math.inf, math.inf)

    for t in range(grid.hours):
        for node in grid.node_ids:
            program.add_constraint(_net_injection(grid, node, t, mlp.g, mlp.f), '==', grid.demand_at(day, node, t), name=var_name('balance', node, t))
        for line in grid.lines:
            f = mlp.f[(line.id, t)]
            angle = (mlp.theta[(line.from_node, t)] - mlp.theta[(line.to_node, t)]) / line.reactance
            program.add_constraint(f - angle, '==', 0.0, name=var_name('flowdef', line.id, t))
        for gen in grid.all_gens:
            g = mlp.g[(gen.id, t)]
            program.add_constraint(g, '>=', 0.0, name=var_name('gmin', gen.id, t))
            program.add_constraint(g, '<=', day_offers[(gen.id, day, t)], name=var_name('gmax', gen.id, t))
        for line in grid.lines:
            f = mlp.f[(line.id, t)]
            program.add_constraint(f, '<=', line.capacity, name=var_name('fmax', line.id, t))
            program.add_constraint(f, '>=', -line.capacity, name=var_name('fmin', line.id, t))

    program.set_objective(LinExpr.sum(mlp.g[(gen.id, t)] * -gen.cost for gen in grid.all_gens for t in range(grid.hours)), 'max')
    return mlp

def _net_injection(grid: GridModel, node: str, t: int, g: dict, f: dict) -> LinExpr:
    expr = LinExpr.sum(g[(gen.id, t)] for gen in grid.gens_at_node(node))
    for line in grid.lines:
        if line.to_node == node:
            expr = expr + f[(line.id, t)]
        if line.from_node == node:
            expr = expr - f[(line.id, t)]
    return expr



## Solutions
############

@dataclass
class MarketSolution:
    """Primal-dual point of one day's market in market sign conventions"""
    day: str
    objective: float
    dispatch: dict[tuple[str, int], float] = field(default_factory=dict)
    flows: dict[tuple[str, int], float] = field(default_factory=dict)
    angles: dict[tuple[str, int], float] = field(default_factory=dict)
    prices: dict[tuple[str, int], float] = field(default_factory=dict)
    xi: dict[tuple[str, int], float] = field(default_factory=dict)
    gamma_lo: dict[tuple[str, int], float] = field(default_factory=dict)
    gamma_hi: dict[tuple[str, int], float] = field(default_factory=dict)
    delta_lo: dict[tuple[str, int], float] = field(default_factory=dict)
    delta_hi: dict[tuple[str, int], float] = field(default_factory=dict)

def solve_market(mlp: MarketLp, options: SolverOptions | None = None) -> SolveResult:
    result = solve_lp(mlp.program, options)
    logger.debug("%s: %s, objective %s", mlp.program.name, result.status, result.objective)
    return result

def extract_market_solution(mlp: MarketLp, result: SolveResult) -> MarketSolution:
    if result.status != 'optimal':
        raise MarketError(f"market of `{mlp.day}` has no optimal solution (status `{result.status}`)")
    grid = mlp.grid
    sol = MarketSolution(mlp.day, float(result.objective))
    for t in range(grid.hours):
        for gen in grid.all_gens:
            key = (gen.id, t)
            sol.dispatch[key] = result.value(mlp.g[key])
            sol.gamma_lo[key] = -result.dual(var_name('gmin', gen.id, t))
            sol.gamma_hi[key] = result.dual(var_name('gmax', gen.id, t))
        for line in grid.lines:
            key = (line.id, t)
            sol.flows[key] = result.value(mlp.f[key])
            sol.xi[key] = -result.dual(var_name('flowdef', line.id, t))
            sol.delta_lo[key] = -result.dual(var_name('fmin', line.id, t))
            sol.delta_hi[key] = result.dual(var_name('fmax', line.id, t))
        for node in grid.node_ids:
            key = (node, t)
            sol.angles[key] = result.value(mlp.theta[key])
            sol.prices[key] = -result.dual(var_name('balance', node, t))
    return sol



## KKT system
#############

@dataclass
class KktBounds:
    """Finite boxes for the dual variables so the search space is bounded"""
    lam_lo: float
    lam_hi: float
    gamma_hi: float
    delta_hi: float
    xi_hi: float
    theta_hi: float

    @classmethod
    def from_grid(cls, grid: GridModel, factor: float = 10.0, lam_lo: float | None = None, lam_hi: float | None = None) -> KktBounds:
        max_cost = max((g.cost for g in grid.all_gens), default=0.0)
        price_range = max(1.0, max_cost)
        lam_lo = -factor * price_range if lam_lo is None else lam_lo
        lam_hi = factor * price_range if lam_hi is None else lam_hi
        spread = lam_hi - lam_lo + max_cost
        return cls(lam_lo, lam_hi, spread, factor * spread, factor * spread, theta_bound(grid))

@dataclass
class KktBlock:
    """Variables and rows of one day's market KKT conditions inside a larger program"""
    day: str
    g: dict[tuple[str, int], Variable] = field(default_factory=dict)
    f: dict[tuple[str, int], Variable] = field(default_factory=dict)
    theta: dict[tuple[str, int], Variable] = field(default_factory=dict)
    lam: dict[tuple[str, int], Variable] = field(default_factory=dict)
    xi: dict[tuple[str, int], Variable] = field(default_factory=dict)
    gamma_lo: dict[tuple[str, int], Variable] = field(default_factory=dict)
    gamma_hi: dict[tuple[str, int], Variable] = field(default_factory=dict)
    delta_lo: dict[tuple[str, int], Variable] = field(default_factory=dict)
    delta_hi: dict[tuple[str, int], Variable] = field(default_factory=dict)
    offer_slack: dict[tuple[str, int], Variable] = field(default_factory=dict)
    flow_slack_lo: dict[tuple[str, int], Variable] = field(default_factory=dict)
    flow_slack_hi: dict[tuple[str, int], Variable] = field(default_factory=dict)
    ref_nodes: list[str] = field(default_factory=list)

    def complementarity_pairs(self) -> list[tuple[Variable, Variable]]:
        pairs = []
        for key, g in self.g.items():
            pairs.append((g, self.gamma_lo[key]))
            pairs.append((self.offer_slack[key], self.gamma_hi[key]))
        for key in self.f:
            pairs.append((self.flow_slack_lo[key], self.delta_lo[key]))
            pairs.append((self.flow_slack_hi[key], self.delta_hi[key]))
        return pairs

def add_market_kkt(
    program: ConicProgram,
    grid: GridModel,
    day: str,
    offers: dict[tuple[str, str, int], float | LinExpr | Variable],
    bounds: KktBounds,
    prefix: str = '',
) -> KktBlock:
    """Add primal feasibility, stationarity and SOS1 complementarity of one day's market"""
    check_islands(grid, day)
    block = KktBlock(day, ref_nodes=reference_nodes(grid))
    p = prefix

    for t in range(grid.hours):
        for gen in grid.all_gens:
            key = (gen.id, t)
            offer = offers.get((gen.id, day, t))
            if offer is None:
                raise MarketError(f"no offer for `{gen.id}` on `{day}` hour {t}")
            block.g[key] = program.add_variable(var_name(f"{p}g", gen.id, day, t), 0.0, math.inf)
            block.offer_slack[key] = program.add_variable(var_name(f"{p}sg", gen.id, day, t), 0.0, math.inf)
            program.add_constraint(block.offer_slack[key] + block.g[key], '==', offer, name=var_name(f"{p}offer", gen.id, day, t))
            block.gamma_lo[key] = program.add_variable(var_name(f"{p}gamlo", gen.id, day, t), 0.0, bounds.gamma_hi)
            block.gamma_hi[key] = program.add_variable(var_name(f"{p}gamhi", gen.id, day, t), 0.0, bounds.gamma_hi)
        for line in grid.lines:
            key = (line.id, t)
            block.f[key] = program.add_variable(var_name(f"{p}f", line.id, day, t), -line.capacity, line.capacity)
            block.flow_slack_lo[key] = program.add_variable(var_name(f"{p}sflo", line.id, day, t), 0.0, 2 * line.capacity)
            block.flow_slack_hi[key] = program.add_variable(var_name(f"{p}sfhi", line.id, day, t), 0.0, 2 * line.capacity)
            program.add_constraint(block.flow_slack_lo[key] - block.f[key], '==', line.capacity, name=var_name(f"{p}flo", line.id, day, t))
            program.add_constraint(block.flow_slack_hi[key] + block.f[key], '==', line.capacity, name=var_name(f"{p}fhi", line.id, day, t))
            block.xi[key] = program.add_variable(var_name(f"{p}xi", line.id, day, t), -bounds.xi_hi, bounds.xi_hi)
            block.delta_lo[key] = program.add_variable(var_name(f"{p}dello", line.id, day, t), 0.0, bounds.delta_hi)
            block.delta_hi[key] = program.add_variable(var_name(f"{p}delhi", line.id, day, t), 0.0, bounds.delta_hi)
        for node in grid.node_ids:
            key = (node, t)
            if node in block.ref_nodes:
                block.theta[key] = program.add_variable(var_name(f"{p}theta", node, day, t), 0.0, 0.0)
            else:
                block.theta[key] = program.add_variable(var_name(f"{p}theta", node, day, t), -bounds.theta_hi, bounds.theta_hi)
            block.lam[key] = program.add_variable(var_name(f"{p}lam", node, day, t), bounds.lam_lo, bounds.lam_hi)

    for t in range(grid.hours):
        # Primal feasibility
        for node in grid.node_ids:
            program.add_constraint(_net_injection(grid, node, t, block.g, block.f), '==', grid.demand_at(day, node, t), name=var_name(f"{p}bal", node, day, t))
        for line in grid.lines:
            angle = (block.theta[(line.from_node, t)] - block.theta[(line.to_node, t)]) / line.reactance
            program.add_constraint(block.f[(line.id, t)] - angle, '==', 0.0, name=var_name(f"{p}fdef", line.id, day, t))

        # Stationarity
        for gen in grid.all_gens:
            key = (gen.id, t)
            lam = block.lam[(gen.node, t)]
            program.add_constraint(lam + block.gamma_lo[key] - block.gamma_hi[key], '==', gen.cost, name=var_name(f"{p}statg", gen.id, day, t))
        for line in grid.lines:
            key = (line.id, t)
            expr = block.xi[key] + block.lam[(line.to_node, t)] - block.lam[(line.from_node, t)] + block.delta_lo[key] - block.delta_hi[key]
            program.add_constraint(expr, '==', 0.0, name=var_name(f"{p}statf", line.id, day, t))
        for node in grid.node_ids:
            if node in block.ref_nodes:
                continue
            expr = LinExpr()
            for line in grid.lines:
                if line.from_node == node:
                    expr = expr + block.xi[(line.id, t)] / line.reactance
                if line.to_node == node:
                    expr = expr - block.xi[(line.id, t)] / line.reactance
            program.add_constraint(expr, '==', 0.0, name=var_name(f"{p}stattheta", node, day, t))

    for a, b in block.complementarity_pairs():
        program.add_sos1([a, b], name=f"{p}sos_{a.name}")
    return block

@dataclass
class KktSystem:
    program: ConicProgram
    block: KktBlock

def build_kkt_system(mlp: MarketLp, bounds: KktBounds | None = None) -> KktSystem:
    """Feasibility program whose solutions are the primal-dual optima of the market LP"""
    bounds = bounds or KktBounds.from_grid(mlp.grid)
    program = ConicProgram(f"kkt_{mlp.day}")
    block = add_market_kkt(program, mlp.grid, mlp.day, mlp.offers, bounds)
    program.set_objective(0.0, 'max')
    return KktSystem(program, block)

def kkt_solution(system: KktSystem, grid: GridModel, result: SolveResult) -> MarketSolution:
    """Read a MarketSolution off a solved KKT program"""
    if not result.has_solution:
        raise MarketError(f"KKT system of `{system.block.day}` has no solution (status `{result.status}`)")
    b = system.block
    sol = MarketSolution(b.day, 0.0)
    for key in b.g:
        sol.dispatch[key] = result.value(b.g[key])
        sol.gamma_lo[key] = result.value(b.gamma_lo[key])
        sol.gamma_hi[key] = result.value(b.gamma_hi[key])
    for key in b.f:
        sol.flows[key] = result.value(b.f[key])
        sol.xi[key] = result.value(b.xi[key])
        sol.delta_lo[key] = result.value(b.delta_lo[key])
        sol.delta_hi[key] = result.value(b.delta_hi[key])
    for key in b.lam:
        sol.angles[key] = result.value(b.theta[key])
        sol.prices[key] = result.value(b.lam[key])
    costs = {g.id: g.cost for g in grid.all_gens}
    sol.objective = -math.fsum(costs[gen] * value for (gen, _), value in sol.dispatch.items())
    return sol



## Verification
###############

def verify_kkt_point(mlp: MarketLp, point: MarketSolution, tol: float = 1e-6) -> dict:
    """Largest residual per KKT family at a candidate primal-dual point

    Families: primal (balance, flow definition, bounds), stationarity of g, f and theta, dual sign,
    complementarity, and the gap between primal and dual objectives.
    """
    grid, day = mlp.grid, mlp.day
    primal = stat_g = stat_f = stat_theta = sign = comp = 0.0

    for t in range(grid.hours):
        for node in grid.node_ids:
            injection = sum(point.dispatch[(g.id, t)] for g in grid.gens_at_node(node))
            for line in grid.lines:
                if line.to_node == node:
                    injection += point.flows[(line.id, t)]
                if line.from_node == node:
                    injection -= point.flows[(line.id, t)]
            primal = max(primal, abs(injection - grid.demand_at(day, node, t)))
        for line in grid.lines:
            key = (line.id, t)
            f = point.flows[key]
            angle = (point.angles[(line.from_node, t)] - point.angles[(line.to_node, t)]) / line.reactance
            primal = max(primal, abs(f - angle), max(0.0, abs(f) - line.capacity))
            lam_o, lam_r = point.prices[(line.from_node, t)], point.prices[(line.to_node, t)]
            stat_f = max(stat_f, abs(point.xi[key] + lam_r - lam_o + point.delta_lo[key] - point.delta_hi[key]))
            sign = max(sign, -point.delta_lo[key], -point.delta_hi[key])
            comp = max(comp, abs((f + line.capacity) * point.delta_lo[key]), abs((line.capacity - f) * point.delta_hi[key]))
        for gen in grid.all_gens:
            key = (gen.id, t)
            g = point.dispatch[key]
            offer = mlp.offers[(gen.id, day, t)]
            primal = max(primal, -g, g - offer)
            lam = point.prices[(gen.node, t)]
            stat_g = max(stat_g, abs(-gen.cost + lam + point.gamma_lo[key] - point.gamma_hi[key]))
            sign = max(sign, -point.gamma_lo[key], -point.gamma_hi[key])
            comp = max(comp, abs(g * point.gamma_lo[key]), abs((offer - g) * point.gamma_hi[key]))
        for node in grid.node_ids:
            if node in mlp.ref_nodes:
                continue
            total = 0.0
            for line in grid.lines:
                if line.from_node == node:
                    total += point.xi[(line.id, t)] / line.reactance
                if line.to_node == node:
                    total -= point.xi[(line.id, t)] / line.reactance
            stat_theta = max(stat_theta, abs(total))

    primal_obj = -math.fsum(gen.cost * point.dispatch[(gen.id, t)] for gen in grid.all_gens for t in range(grid.hours))
    dual_obj = math.fsum(
        [-point.prices[(n, t)] * grid.demand_at(day, n, t) for n in grid.node_ids for t in range(grid.hours)]
        + [point.gamma_hi[(g.id, t)] * mlp.offers[(g.id, day, t)] for g in grid.all_gens for t in range(grid.hours)]
        + [l.capacity * (point.delta_lo[(l.id, t)] + point.delta_hi[(l.id, t)]) for l in grid.lines for t in range(grid.hours)]
    )
    gap = abs(primal_obj - dual_obj) / max(1.0, abs(primal_obj))

    residuals = {
        'primal': primal,
        'stationarity_g': stat_g,
        'stationarity_f': stat_f,
        'stationarity_theta': stat_theta,
        'dual_sign': sign,
        'complementarity': comp,
        'duality_gap': gap,
    }
    return {'day': day, 'tol': tol, 'residuals': residuals, 'passed': all(v <= tol for v in residuals.values())}
