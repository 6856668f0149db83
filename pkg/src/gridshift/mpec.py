"""One state's strategic expansion problem as a mixed-integer second-order cone program

The upper level chooses candidate capacities, expected dispatch and zonal net imports; the lower
level is the wholesale market of every representative day, replaced by its KKT conditions with
SOS1 complementarity. The only bilinear term, price times import at the state's own nodes, is made
exact by expanding the price in binary steps and linearizing each bit-import product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math

from .conic_program import ConicProgram, LinExpr, SolveResult, Variable, as_expr, var_name
from .errors import MpecError, RpsInfeasibleError
from .grid_model import CandidateGenerator, Generator, GridModel, PolicySet
from .market import KktBlock, KktBounds, add_market_kkt, build_offers
from .plan import Plan, plan_key
from .records import Record, RecordField
from .uncertainty import AffinePolicy, SocBlock, build_affine_policy, build_soc_constraints, error_terms

logger = logging.getLogger(__name__)

HedgeKey = tuple[str, str, str, int]



## Options
##########

class MpecOptions(Record):
    """Discretization and bounding choices of the strategic program

    price_step defaults to 1.25 * max marginal cost / (2^bits - 1), so the price grid spans
    [price_floor, price_floor + 1.25 * max cost].
    """
    bits: int = RecordField(default=10, ge=0, le=30)
    price_floor: float = 0.0
    price_step: float | None = RecordField(default=None, gt=0)
    dual_bound_factor: float = RecordField(default=10.0, gt=0)
    linearize_prices: bool = True
    chance_constraints: bool = True
    participation: dict[str, float] | None = None

    def step(self, grid: GridModel) -> float:
        if self.price_step is not None:
            return self.price_step
        if self.bits == 0:
            return 0.0
        max_cost = max((g.cost for g in grid.all_gens), default=0.0)
        return 1.25 * max(max_cost, 1.0) / (2 ** self.bits - 1)

    def price_cap(self, grid: GridModel) -> float:
        return self.price_floor + self.step(grid) * (2 ** self.bits - 1)



## Price expansion
##################

@dataclass
class PriceExpansion:
    """lambda = lam_min + step * sum_k 2^k z_k at one own node and hour"""
    node: str
    day: str
    hour: int
    lam_min: float
    step: float
    bits: list[Variable] = field(default_factory=list)
    products: list[Variable] = field(default_factory=list)

    def price(self) -> LinExpr:
        return LinExpr.sum([self.lam_min, *(z * (self.step * 2 ** k) for k, z in enumerate(self.bits))])

def expand_price(lam_min: float, step: float, bits: int, values: list[int] | list[float]) -> float:
    """Price level selected by a bit vector, least significant bit first"""
    if len(values) != bits:
        raise MpecError(f"expected {bits} bits, got {len(values)}")
    return lam_min + step * math.fsum(2 ** k * v for k, v in enumerate(values))

def add_price_expansion(program: ConicProgram, lam: Variable, node: str, day: str, t: int, lam_min: float, step: float, bits: int) -> PriceExpansion:
    expansion = PriceExpansion(node, day, t, lam_min, step)
    expansion.bits = [program.add_binary(var_name('z', node, day, t, k)) for k in range(bits)]
    program.add_constraint(lam, '==', expansion.price(), name=var_name('lamexp', node, day, t))
    return expansion

def linearize_bilinear_price(
    program: ConicProgram,
    expansion: PriceExpansion,
    quantity: Variable | LinExpr,
    lower: float,
    upper: float,
) -> LinExpr:
    """Exact linear form of lambda * quantity for a quantity within [lower, upper]

    Each s_k = z_k * quantity is pinned by L z <= s <= U z and q - U (1 - z) <= s <= q - L (1 - z).
    """
    if not (math.isfinite(lower) and math.isfinite(upper)):
        raise MpecError(f"price product at `{expansion.node}` needs finite quantity bounds, got [{lower}, {upper}]")
    if lower > upper:
        raise MpecError(f"price product at `{expansion.node}` has empty bounds [{lower}, {upper}]")
    q = as_expr(quantity)
    key = (expansion.node, expansion.day, expansion.hour)
    expansion.products = []
    for k, z in enumerate(expansion.bits):
        s = program.add_variable(var_name('s', *key, k), lower, upper)
        program.add_constraint(s - z * lower, '>=', 0.0, name=var_name('mclo', *key, k))
        program.add_constraint(s - z * upper, '<=', 0.0, name=var_name('mchi', *key, k))
        program.add_constraint(s - q - z * upper, '>=', -upper, name=var_name('mcqlo', *key, k))
        program.add_constraint(s - q - z * lower, '<=', -lower, name=var_name('mcqhi', *key, k))
        expansion.products.append(s)
    return q * expansion.lam_min + LinExpr.sum(s * (expansion.step * 2 ** k) for k, s in enumerate(expansion.products))

def sos1_complementarity(program: ConicProgram, a: Variable | LinExpr, b: Variable | LinExpr, name: str) -> tuple[Variable, Variable]:
    """0 <= a ⟂ b >= 0 as one SOS1 set; expressions get an auxiliary variable"""
    members = []
    for side, item in (('a', a), ('b', b)):
        if isinstance(item, Variable):
            if item.lb < 0:
                raise MpecError(f"complementarity member `{item.name}` may be negative")
            members.append(item)
            continue
        aux = program.add_variable(f"{name}_{side}", 0.0, math.inf)
        program.add_constraint(aux - item, '==', 0.0, name=f"{name}_{side}def")
        members.append(aux)
    program.add_sos1(members, name=name)
    return members[0], members[1]



## Pre-checks
#############

def rps_precheck(grid: GridModel, policies: PolicySet, state: str) -> None:
    """Raise when no affordable renewable build-out can meet the state's RPS on some day

    The largest reachable renewable energy is a fractional knapsack over the candidates with the
    capital budget as capacity.
    """
    policy = policies.policy(state)
    if policy.rps <= 0:
        return
    budget = math.inf if policy.capital_budget is None else policy.capital_budget
    renewables = grid.gens_in_state(state, 'renewable')
    for day in grid.day_ids:
        required = policy.rps * grid.state_demand(state, day)
        reachable = 0.0
        items = []
        for gen in renewables:
            energy = math.fsum(grid.rho(gen, day, t) for t in range(grid.hours))
            if isinstance(gen, CandidateGenerator):
                items.append((energy, policies.capital_cost(gen), gen.g_max))
            else:
                reachable += energy * gen.g_max
        remaining = budget
        for energy, cost, cap in sorted(items, key=lambda i: -i[0] / i[1] if i[1] > 0 else -math.inf):
            if cost <= 0:
                reachable += energy * cap
                continue
            built = min(cap, remaining / cost)
            reachable += energy * built
            remaining -= built * cost
            if remaining <= 0:
                break
        logger.debug("%s/%s: RPS needs %.3f MWh, reachable %.3f MWh", state, day, required, reachable)
        if required > reachable * (1.0 + 1e-9) + 1e-9:
            raise RpsInfeasibleError(state, day, required, reachable)



## Instance
###########

@dataclass
class ProductTerm:
    """price * import at one own node, linearized when expansion is set"""
    node: str
    day: str
    hour: int
    expansion: PriceExpansion | None = None
    expr: LinExpr | None = None

@dataclass
class MpecInstance:
    state: str
    grid: GridModel
    policies: PolicySet
    options: MpecOptions
    program: ConicProgram
    policy: AffinePolicy
    capacity: dict[str, Variable] = field(default_factory=dict)
    gbar: dict[tuple[str, str, int], LinExpr] = field(default_factory=dict)
    imports: dict[tuple[str, str, int], Variable] = field(default_factory=dict)
    kkt: dict[str, KktBlock] = field(default_factory=dict)
    expansions: dict[tuple[str, str, int], PriceExpansion] = field(default_factory=dict)
    products: list[ProductTerm] = field(default_factory=list)
    soc_blocks: list[SocBlock] = field(default_factory=list)
    rival_capacity: dict[str, float] = field(default_factory=dict)
    hedge_keys: list[HedgeKey] = field(default_factory=list)
    hedge_vars: dict[HedgeKey, Variable] = field(default_factory=dict)
    hedge_bounds: dict[HedgeKey, tuple[float, float]] = field(default_factory=dict)
    base_objective: LinExpr = field(default_factory=LinExpr)

    def hedge_values(self, result: SolveResult) -> list[float]:
        return [result.value(self.hedge_vars[k]) for k in self.hedge_keys]

def capacity_upper_bound(gen: CandidateGenerator, policies: PolicySet, state: str) -> float:
    """g_max, tightened by what the capital budget alone could buy"""
    budget = policies.policy(state).capital_budget
    cost = policies.capital_cost(gen)
    if budget is None or cost <= 0:
        return gen.g_max
    return min(gen.g_max, budget / cost)

def build_mpec(
    grid: GridModel,
    policies: PolicySet,
    state: str,
    rival_capacity: dict[str, float] | None = None,
    options: MpecOptions | None = None,
    check: bool = True,
) -> MpecInstance:
    """Assemble the strategic program of `state` against fixed rival capacities"""
    options = options or MpecOptions()
    rival_capacity = dict(rival_capacity or {})
    if state not in grid.states:
        raise MpecError(f"unknown state `{state}`")
    if check:
        policies.check_grid(grid)
        rps_precheck(grid, policies, state)

    policy = policies.policy(state)
    if options.chance_constraints:
        affine = build_affine_policy(grid, state, options.participation)
    else:
        affine = AffinePolicy(state, {})
    program = ConicProgram(f"mpec_{state}")
    inst = MpecInstance(state, grid, policies, options, program, affine, rival_capacity=rival_capacity)
    own_gens = grid.gens_in_state(state)
    own_nodes = grid.nodes_in_state(state)
    T = range(grid.hours)

    # Upper-level decisions
    for gen in own_gens:
        if isinstance(gen, CandidateGenerator):
            inst.capacity[gen.id] = program.add_variable(var_name('cap', gen.id), 0.0, capacity_upper_bound(gen, policies, state))
    for gen in own_gens:
        for day in grid.day_ids:
            for t in T:
                inst.gbar[(gen.id, day, t)] = _expected_output(program, grid, gen, day, t, inst.capacity)
    for node in own_nodes:
        bound = policy.node_import_limit(grid, node)
        for day in grid.day_ids:
            for t in T:
                inst.imports[(node, day, t)] = program.add_variable(var_name('pimp', node, day, t), -bound, bound)

    _add_operation_rows(inst, own_gens, own_nodes)
    _add_policy_rows(inst, own_gens)
    inst.soc_blocks = build_soc_constraints(
        program, grid, state, affine, inst.capacity,
        {k: v for k, v in inst.gbar.items() if grid.gen(k[0]).kind == 'controllable'},
        policy.security,
    )

    # Lower level, one market per representative day
    step = options.step(grid)
    lam_hi = options.price_cap(grid) if options.linearize_prices else None
    bounds = KktBounds.from_grid(grid, options.dual_bound_factor, lam_lo=options.price_floor, lam_hi=lam_hi)
    offers = build_offers(grid, state, inst.gbar, rival_capacity)
    for day in grid.day_ids:
        inst.kkt[day] = add_market_kkt(program, grid, day, offers, bounds)

    import_cost = LinExpr()
    for node in own_nodes:
        bound = policy.node_import_limit(grid, node)
        for day in grid.day_ids:
            for t in T:
                key = (node, day, t)
                term = ProductTerm(node, day, t)
                inst.products.append(term)
                if bound <= 0:
                    term.expr = LinExpr()
                    continue
                if not options.linearize_prices:
                    continue
                lam = inst.kkt[day].lam[(node, t)]
                term.expansion = add_price_expansion(program, lam, node, day, t, options.price_floor, step, options.bits)
                inst.expansions[key] = term.expansion
                term.expr = linearize_bilinear_price(program, term.expansion, inst.imports[key], -bound, bound)
                import_cost = import_cost + term.expr * grid.probability(day)

    dropped = [p for p in inst.products if p.expr is None]
    if dropped:
        logger.warning(
            "%s: linearize_prices is off, %d price x import products left out of the objective",
            state, len(dropped),
        )
    inst.base_objective = _welfare(inst, own_gens, own_nodes) - import_cost
    program.set_objective(inst.base_objective, 'max')
    _collect_hedges(inst, offers, bounds)
    logger.info(
        "%s: MPEC with %d variables, %d rows, %d cones, %d SOS1 sets, %d binaries",
        state, len(program.variables), len(program.constraints), len(program.cones), len(program.sos1), len(program.binaries),
    )
    return inst

def _expected_output(program: ConicProgram, grid: GridModel, gen: Generator, day: str, t: int, capacity: dict[str, Variable]) -> LinExpr:
    if gen.kind == 'renewable':
        cap = capacity[gen.id] if isinstance(gen, CandidateGenerator) else gen.g_max
        return as_expr(cap) * grid.rho(gen, day, t)
    ub = capacity[gen.id].ub if isinstance(gen, CandidateGenerator) else gen.g_max
    return as_expr(program.add_variable(var_name('gbar', gen.id, day, t), 0.0, ub))

def _add_operation_rows(inst: MpecInstance, own_gens: list[Generator], own_nodes: list[str]) -> None:
    grid, program = inst.grid, inst.program
    for day in grid.day_ids:
        for t in range(grid.hours):
            for node in own_nodes:
                supply = LinExpr.sum(inst.gbar[(g.id, day, t)] for g in grid.gens_at_node(node))
                program.add_constraint(supply + inst.imports[(node, day, t)], '==', grid.demand_at(day, node, t), name=var_name('zonal', node, day, t))
        for gen in own_gens:
            if gen.kind != 'controllable':
                continue
            for t in range(1, grid.hours):
                step = inst.gbar[(gen.id, day, t)] - inst.gbar[(gen.id, day, t - 1)]
                if gen.ramp_up is not None:
                    program.add_constraint(step, '<=', gen.ramp_up, name=var_name('rampup', gen.id, day, t))
                if gen.ramp_down is not None:
                    program.add_constraint(step, '>=', -gen.ramp_down, name=var_name('rampdown', gen.id, day, t))

def _renewable_energy(inst: MpecInstance, own_gens: list[Generator], day: str) -> LinExpr:
    return LinExpr.sum(inst.gbar[(g.id, day, t)] for g in own_gens if g.kind == 'renewable' for t in range(inst.grid.hours))

def _expected_renewable(inst: MpecInstance, own_gens: list[Generator], day: str) -> LinExpr:
    """sum_t E[g_R]: expected output plus capacity-scaled forecast bias"""
    grid = inst.grid
    total = _renewable_energy(inst, own_gens, day)
    for t in range(grid.hours):
        _, mean = error_terms(grid, inst.state, day, t, inst.capacity)
        total = total + mean
    return total

def _add_policy_rows(inst: MpecInstance, own_gens: list[Generator]) -> None:
    grid, program, policies, state = inst.grid, inst.program, inst.policies, inst.state
    policy = policies.policy(state)
    if policy.rps > 0:
        for day in grid.day_ids:
            program.add_constraint(_renewable_energy(inst, own_gens, day), '>=', policy.rps * grid.state_demand(state, day), name=var_name('rps', state, day))
    if policy.capital_budget is not None:
        spend = LinExpr.sum(inst.capacity[g.id] * policies.capital_cost(g) for g in own_gens if isinstance(g, CandidateGenerator))
        program.add_constraint(spend, '<=', policy.capital_budget, name=var_name('capbudget', state))
    if policy.policy_budget is not None:
        for day in grid.day_ids:
            program.add_constraint(_tariff_payments(inst, own_gens, day), '<=', policy.policy_budget, name=var_name('polbudget', state, day))

def _tariff_payments(inst: MpecInstance, own_gens: list[Generator], day: str) -> LinExpr:
    policies, state = inst.policies, inst.state
    feed_in = _expected_renewable(inst, own_gens, day) * policies.policy(state).feed_in_tariff
    capacity = LinExpr.sum(
        inst.capacity[g.id] * policies.capacity_tariff(state)
        for g in own_gens if g.kind == 'renewable' and isinstance(g, CandidateGenerator)
    )
    return feed_in + capacity

def _welfare(inst: MpecInstance, own_gens: list[Generator], own_nodes: list[str]) -> LinExpr:
    """Expected retail revenue minus tariffs and generation cost, less daily capital cost"""
    grid, policies, state = inst.grid, inst.policies, inst.state
    policy = policies.policy(state)
    total = LinExpr()
    for day in grid.day_ids:
        daily = LinExpr()
        for t in range(grid.hours):
            for node in own_nodes:
                daily = daily + policy.retail_price(node, t) * grid.demand_at(day, node, t)
            _, mean = error_terms(grid, state, day, t, inst.capacity)
            for gen in own_gens:
                expected = inst.gbar[(gen.id, day, t)]
                if gen.kind == 'renewable':
                    expected = expected + _bias(grid, gen, day, t, inst.capacity)
                else:
                    expected = expected - mean * inst.policy.of(gen.id)
                daily = daily - expected * gen.cost
        daily = daily - _expected_renewable(inst, own_gens, day) * policy.feed_in_tariff
        total = total + daily * grid.probability(day)

    for gen in own_gens:
        if isinstance(gen, CandidateGenerator):
            total = total - inst.capacity[gen.id] * policies.capital_cost(gen)
            if gen.kind == 'renewable':
                total = total - inst.capacity[gen.id] * policies.capacity_tariff(state)
    return total

def _bias(grid: GridModel, gen: Generator, day: str, t: int, capacity: dict[str, Variable]) -> LinExpr:
    cap = capacity[gen.id] if isinstance(gen, CandidateGenerator) else gen.g_max
    return as_expr(cap) * grid.upsilon(gen, day, t)

def hedge_keys(grid: GridModel) -> list[HedgeKey]:
    """Market dispatch of every unit and every nodal price, the values actors must agree on"""
    keys: list[HedgeKey] = []
    for day in grid.day_ids:
        for t in range(grid.hours):
            keys.extend(('g', gen.id, day, t) for gen in grid.all_gens)
            keys.extend(('lam', node, day, t) for node in grid.node_ids)
    return keys

def _collect_hedges(inst: MpecInstance, offers: dict, bounds: KktBounds) -> None:
    for key in hedge_keys(inst.grid):
        family, item, day, t = key
        block = inst.kkt[day]
        if family == 'g':
            inst.hedge_vars[key] = block.g[(item, t)]
            inst.hedge_bounds[key] = (0.0, _upper_value(offers[(item, day, t)], inst.program))
        else:
            inst.hedge_vars[key] = block.lam[(item, t)]
            inst.hedge_bounds[key] = (bounds.lam_lo, bounds.lam_hi)
        inst.hedge_keys.append(key)

def _upper_value(item: Variable | LinExpr | float, program: ConicProgram) -> float:
    """Largest value an offer expression can take from its variables' boxes"""
    expr = as_expr(item)
    total = expr.constant
    for index, coef in expr.terms.items():
        var = program.variables[index]
        total += coef * (var.ub if coef > 0 else var.lb)
    return total



## Results
##########

def bilinear_product_terms(inst: MpecInstance) -> list[ProductTerm]:
    """Price-import products left without an exact linear form"""
    return [p for p in inst.products if p.expr is None]

def extract_plan(inst: MpecInstance, result: SolveResult, kind: str = 'mpec', scenario: str = 'basecase') -> Plan:
    if not result.has_solution:
        raise MpecError(f"{inst.state}: no solution to extract (status `{result.status}`)")
    grid = inst.grid
    plan = {
        'kind': kind,
        'scenario': scenario,
        'states': [inst.state],
        'status': result.status,
        'objective': float(result.objective),
        'objectives': {inst.state: float(result.value(inst.base_objective))},
        'chance_constrained': inst.options.chance_constraints,
        'investment': {gen: max(0.0, result.value(var)) for gen, var in inst.capacity.items()},
        'expected_dispatch': {plan_key(*k): result.value(v) for k, v in inst.gbar.items()},
        'imports': {plan_key(*k): result.value(v) for k, v in inst.imports.items()},
        'dispatch': {},
        'flows': {},
        'angles': {},
        'prices': {},
    }
    for day, block in inst.kkt.items():
        for (gen, t), var in block.g.items():
            plan['dispatch'][plan_key(gen, day, t)] = result.value(var)
        for (line, t), var in block.f.items():
            plan['flows'][plan_key(line, day, t)] = result.value(var)
        for (node, t), var in block.lam.items():
            plan['prices'][plan_key(node, day, t)] = result.value(var)
            plan['angles'][plan_key(node, day, t)] = result.value(block.theta[(node, t)])
    for gen, cap in inst.rival_capacity.items():
        if grid.is_candidate(gen):
            plan['investment'].setdefault(gen, cap)
    return Plan(**plan)
