import pytest
import sys
import os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'src')))
from gridshift import *
import itertools
import logging



@pytest.fixture(autouse=True)
def reset_records():
    reset_record_globals()
    yield
    reset_record_globals()



def withholding_grid() -> GridModel:
    """A single seller in SA serving SB's load over an uncongested line"""
    return GridModel(
        name='withholding',
        hours=1,
        nodes=[{'id': 'A', 'state': 'SA'}, {'id': 'B', 'state': 'SB'}],
        lines=[{'id': 'AB', 'from_node': 'A', 'to_node': 'B', 'reactance': 0.1, 'capacity': 100}],
        existing_gens=[{'id': 'A_gen', 'node': 'A', 'kind': 'controllable', 'g_max': 200, 'cost': 10}],
        rep_days=[{'id': 'd1', 'probability': 1.0}],
        demand={'d1': {'B': [50]}},
    )

def rps_grid(wind_max: float = 200) -> GridModel:
    """One isolated state that must build wind to meet its renewable target"""
    return GridModel(
        name='rps',
        hours=1,
        nodes=[{'id': 'A', 'state': 'SA'}],
        existing_gens=[{'id': 'A_coal', 'node': 'A', 'kind': 'controllable', 'g_max': 200, 'cost': 10}],
        candidate_gens=[{'id': 'A_new_wind', 'node': 'A', 'kind': 'renewable', 'g_max': wind_max, 'rho': 0.5, 'capital_cost': 365000}],
        rep_days=[{'id': 'd1', 'probability': 1.0}],
        demand={'d1': {'A': [100]}},
    )

def rps_policies(**policy) -> PolicySet:
    return PolicySet(
        economics={'recovery_years': 1, 'discount_rate': 0},
        states={'SA': {'state': 'SA', 'rps': 0.25, **policy}},
    )

WITHHOLDING_OPTIONS = dict(bits=3, price_step=5.0)



## Options
##########

def test_default_price_step():
    grid = withholding_grid()
    options = MpecOptions(bits=3)
    assert options.step(grid) == pytest.approx(1.25 * 10 / 7)
    assert options.price_cap(grid) == pytest.approx(12.5)
    assert MpecOptions(bits=0).step(grid) == 0.0

def test_explicit_price_step():
    options = MpecOptions(**WITHHOLDING_OPTIONS, price_floor=2.0)
    assert options.step(withholding_grid()) == 5.0
    assert options.price_cap(withholding_grid()) == pytest.approx(37.0)

def test_option_validation():
    with pytest.raises(RecordModelError):
        MpecOptions(bits=31)
    with pytest.raises(RecordModelError):
        MpecOptions(price_step=0)



## Price expansion
##################

def test_expand_price():
    assert expand_price(0.0, 5.0, 3, [1, 0, 1]) == 25.0
    assert expand_price(10.0, 0.5, 2, [1, 1]) == 11.5
    with pytest.raises(MpecError):
        expand_price(0.0, 5.0, 3, [1, 0])

def test_add_price_expansion():
    program = ConicProgram()
    lam = program.add_variable('lam', 0, 100)
    expansion = add_price_expansion(program, lam, 'A', 'd1', 0, 0.0, 1.0, 3)
    assert [z.name for z in expansion.bits] == ['z(A,d1,0,0)', 'z(A,d1,0,1)', 'z(A,d1,0,2)']
    assert expansion.price().terms == {b.index: float(2 ** k) for k, b in enumerate(expansion.bits)}
    program.set_objective(lam, 'max')
    assert solve(program).objective == pytest.approx(7.0)

def price_product_program() -> tuple[ConicProgram, Variable, LinExpr]:
    program = ConicProgram('product')
    lam = program.add_variable('lam', 0, 3)
    q = program.add_variable('q', -10, 10)
    expansion = add_price_expansion(program, lam, 'A', 'd1', 0, 0.0, 1.0, 2)
    return program, q, linearize_bilinear_price(program, expansion, q, -10, 10)

def test_linearized_product_extremes():
    program, _, product = price_product_program()
    program.set_objective(product, 'max')
    assert solve(program).objective == pytest.approx(30.0)
    program, _, product = price_product_program()
    program.set_objective(product, 'min')
    assert solve(program).objective == pytest.approx(-30.0)

def test_linearized_product_is_exact():
    program, q, product = price_product_program()
    program.add_constraint(q, '==', 7)
    program.add_constraint(program.var('lam'), '==', 2)
    program.set_objective(product, 'max')
    assert solve(program).objective == pytest.approx(14.0)

def test_linearization_needs_finite_bounds():
    program = ConicProgram()
    lam = program.add_variable('lam', 0, 3)
    q = program.add_variable('q', -float('inf'), float('inf'))
    expansion = add_price_expansion(program, lam, 'A', 'd1', 0, 0.0, 1.0, 2)
    with pytest.raises(MpecError):
        linearize_bilinear_price(program, expansion, q, float('-inf'), 10)
    with pytest.raises(MpecError):
        linearize_bilinear_price(program, expansion, q, 5, 1)

def test_ten_bit_price_product_error():
    step = 0.05
    for price in (0.0, 3.21, 17.777, 25.0, 42.424, 51.15):
        level = round(price / step)
        for imports in (-80.0, 35.0):
            program = ConicProgram('sweep')
            lam = program.add_variable('lam', 0, 1023 * step)
            q = program.add_variable('q', -100, 100)
            expansion = add_price_expansion(program, lam, 'A', 'd1', 0, 0.0, step, 10)
            product = linearize_bilinear_price(program, expansion, q, -100, 100)
            for k, z in enumerate(expansion.bits):
                program.add_constraint(z, '==', (level >> k) & 1)
            program.add_constraint(q, '==', imports)
            program.set_objective(product, 'max')
            result = solve(program)
            assert result.status == 'optimal'
            assert abs(result.objective - price * imports) <= step / 2 * abs(imports) + 1e-6

def test_sos1_complementarity():
    program = ConicProgram()
    a = program.add_variable('a', 0, 4)
    b = program.add_variable('b', 0, 4)
    first, second = sos1_complementarity(program, a, 4 - b, 'pair')
    assert first is a
    assert second.name == 'pair_b'
    program.set_objective(a + b, 'max')
    result = solve(program)
    assert result.objective == pytest.approx(8.0)
    free = program.add_variable('free', -1, 1)
    with pytest.raises(MpecError):
        sos1_complementarity(program, free, a, 'bad')



## Pre-checks
#############

def test_rps_precheck_passes():
    rps_precheck(rps_grid(), rps_policies(), 'SA')

def test_rps_precheck_capacity_limit():
    with pytest.raises(RpsInfeasibleError) as e:
        rps_precheck(rps_grid(wind_max=40), rps_policies(), 'SA')
    assert e.value.state == 'SA' and e.value.day == 'd1'
    assert e.value.required == pytest.approx(25.0)
    assert e.value.reachable == pytest.approx(20.0)

def test_rps_precheck_budget_limit():
    with pytest.raises(RpsInfeasibleError) as e:
        rps_precheck(rps_grid(), rps_policies(capital_budget=30000), 'SA')
    assert e.value.reachable == pytest.approx(15.0)

def test_rps_infeasible_is_mpec_error():
    with pytest.raises(MpecError):
        build_mpec(rps_grid(wind_max=40), rps_policies(), 'SA')

def test_capacity_upper_bound():
    grid = rps_grid()
    wind = grid.gen('A_new_wind')
    assert capacity_upper_bound(wind, rps_policies(), 'SA') == 200
    assert capacity_upper_bound(wind, rps_policies(capital_budget=60000), 'SA') == pytest.approx(60.0)



## Strategic program
####################

def test_unknown_state():
    with pytest.raises(MpecError):
        build_mpec(withholding_grid(), PolicySet(), 'SZ')

def test_instance_structure():
    inst = build_mpec(withholding_grid(), PolicySet(), 'SA', options=MpecOptions(**WITHHOLDING_OPTIONS))
    assert list(inst.imports) == [('A', 'd1', 0)]
    assert inst.imports[('A', 'd1', 0)].lb == -100
    assert list(inst.kkt) == ['d1']
    assert len(inst.program.binaries) == 3
    assert ('A', 'd1', 0) in inst.expansions
    assert inst.hedge_keys == hedge_keys(inst.grid)
    assert bilinear_product_terms(inst) == []

def test_withholding_raises_price_to_cap():
    grid = withholding_grid()
    inst = build_mpec(grid, PolicySet(), 'SA', options=MpecOptions(**WITHHOLDING_OPTIONS))
    result = solve(inst.program)
    assert result.status == 'optimal'
    assert result.objective == pytest.approx(1250.0, abs=1e-4)
    plan = extract_plan(inst, result)
    assert plan.prices['A|d1|0'] == pytest.approx(35.0, abs=1e-6)
    assert plan.expected_dispatch['A_gen|d1|0'] == pytest.approx(50.0, abs=1e-6)
    assert plan.imports['A|d1|0'] == pytest.approx(-50.0, abs=1e-6)
    assert plan.flows['AB|d1|0'] == pytest.approx(50.0, abs=1e-6)
    assert plan.objectives['SA'] == pytest.approx(1250.0, abs=1e-4)

def two_hour_seller_grid() -> GridModel:
    """A cheap seller in SA against an expensive unit at SB's load"""
    return GridModel(
        name='seller',
        hours=2,
        nodes=[{'id': 'A', 'state': 'SA'}, {'id': 'B', 'state': 'SB'}],
        lines=[{'id': 'AB', 'from_node': 'A', 'to_node': 'B', 'reactance': 0.1, 'capacity': 100}],
        existing_gens=[
            {'id': 'A_gen', 'node': 'A', 'kind': 'controllable', 'g_max': 100, 'cost': 10},
            {'id': 'B_gen', 'node': 'B', 'kind': 'controllable', 'g_max': 200, 'cost': 30},
        ],
        rep_days=[{'id': 'd1', 'probability': 1.0}],
        demand={'d1': {'A': [30, 50], 'B': [90, 70]}},
    )

def test_mpec_matches_offer_enumeration():
    grid = two_hour_seller_grid()
    demand = [30.0, 50.0]
    best, best_offer = -float('inf'), None
    for offer in itertools.product(range(0, 101, 10), repeat=2):
        offers = {('A_gen', 'd1', t): float(offer[t]) for t in range(2)}
        offers.update({('B_gen', 'd1', t): 200.0 for t in range(2)})
        mlp = build_market_lp(grid, offers, 'd1')
        solution = extract_market_solution(mlp, solve_market(mlp))
        value = sum(-10 * offer[t] - solution.prices[('A', t)] * (demand[t] - offer[t]) for t in range(2))
        if value > best:
            best, best_offer = value, offer
    assert best == pytest.approx(1600.0)
    assert best_offer == (100, 100)

    inst = build_mpec(grid, PolicySet(), 'SA', options=MpecOptions(**WITHHOLDING_OPTIONS))
    result = solve(inst.program)
    assert result.status == 'optimal'
    assert result.objective == pytest.approx(best, abs=1e-4)
    plan = extract_plan(inst, result)
    for t in range(2):
        assert plan.expected_dispatch[f'A_gen|d1|{t}'] == pytest.approx(100.0, abs=1e-6)
        assert plan.prices[f'A|d1|{t}'] == pytest.approx(30.0, abs=1e-6)

def test_unlinearized_products_are_reported(caplog):
    options = MpecOptions(**WITHHOLDING_OPTIONS, linearize_prices=False)
    with caplog.at_level(logging.WARNING, logger='gridshift.mpec'):
        inst = build_mpec(withholding_grid(), PolicySet(), 'SA', options=options)
    assert 'left out of the objective' in caplog.text
    assert [(p.node, p.day, p.hour) for p in bilinear_product_terms(inst)] == [('A', 'd1', 0)]
    assert inst.program.binaries == []

def test_rps_builds_minimum_wind():
    inst = build_mpec(rps_grid(), rps_policies(), 'SA', options=MpecOptions(bits=3))
    assert inst.products[0].expr.is_constant()
    result = solve(inst.program)
    plan = extract_plan(inst, result, scenario='rps')
    assert plan.investment['A_new_wind'] == pytest.approx(50.0, abs=1e-6)
    assert plan.expected_dispatch['A_coal|d1|0'] == pytest.approx(75.0, abs=1e-6)
    assert plan.objective == pytest.approx(-10 * 75 - 1000 * 50, abs=1e-3)
    assert plan.scenario == 'rps'
    assert plan.kind == 'mpec'

def test_capital_budget_row():
    inst = build_mpec(rps_grid(), rps_policies(capital_budget=60000), 'SA', options=MpecOptions(bits=3))
    assert 'capbudget(SA)' in [row.name for row in inst.program.constraints]
    assert inst.capacity['A_new_wind'].ub == pytest.approx(60.0)

def test_without_chance_constraints():
    inst = build_mpec(rps_grid(), rps_policies(), 'SA', options=MpecOptions(bits=3, chance_constraints=False))
    assert inst.program.cones == []
    assert 'gmax(A_coal,d1,0)' in [row.name for row in inst.program.constraints]

def test_rival_capacity_enters_plan():
    grid = withholding_grid()
    inst = build_mpec(grid, PolicySet(), 'SA', options=MpecOptions(**WITHHOLDING_OPTIONS))
    assert inst.rival_capacity == {}
    with pytest.raises(MpecError):
        extract_plan(inst, SolveResult(status='infeasible'))
