import pytest
import sys
import os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'src')))
from gridshift import *
import numpy as np
import time



@pytest.fixture(autouse=True)
def reset_records():
    reset_record_globals()
    yield
    reset_record_globals()



def hub_grid() -> GridModel:
    """Two leaders importing from a hub unit over uncongested lines; the market outcome is unique"""
    return GridModel(
        name='hub',
        hours=1,
        nodes=[{'id': 'A', 'state': 'SA'}, {'id': 'B', 'state': 'SB'}, {'id': 'H', 'state': 'SH'}],
        lines=[
            {'id': 'AH', 'from_node': 'A', 'to_node': 'H', 'reactance': 0.1, 'capacity': 100},
            {'id': 'BH', 'from_node': 'B', 'to_node': 'H', 'reactance': 0.1, 'capacity': 100},
        ],
        existing_gens=[{'id': 'H_gen', 'node': 'H', 'kind': 'controllable', 'g_max': 200, 'cost': 10}],
        candidate_gens=[
            {'id': 'A_new', 'node': 'A', 'kind': 'controllable', 'g_max': 50, 'cost': 5, 'capital_cost': 1000000},
            {'id': 'B_new', 'node': 'B', 'kind': 'controllable', 'g_max': 50, 'cost': 5, 'capital_cost': 1000000},
        ],
        rep_days=[{'id': 'd1', 'probability': 1.0}],
        demand={'d1': {'A': [40], 'B': [40]}},
    )

def fast_options(**changes) -> PhOptions:
    return PhOptions(mpec={'bits': 3, 'price_step': 5.0}, jobs=1, **changes)

def toy_plan(state: str, investment: dict[str, float], flow: float) -> Plan:
    return Plan(
        kind='epec',
        states=[state],
        objective=1.0,
        objectives={state: 1.0},
        investment=investment,
        expected_dispatch={f"{state[1]}_new|d1|0": 0.0},
        flows={'AH|d1|0': flow},
        angles={'A|d1|0': 0.0, 'H|d1|0': -flow / 10},
    )



## Initialization
#################

def test_initialize():
    ph = ph_initialize(['SA', 'SB'], hub_grid(), PhOptions(rho_g=0.7, rho_lambda=0.2))
    assert ph.keys == hedge_keys(hub_grid())
    assert len(ph.keys) == 3 + 3
    assert list(ph.rho) == [0.7] * 3 + [0.2] * 3
    assert all(not m.any() for m in ph.multipliers.values())
    assert ph.iteration == 0 and ph.averages is None

def test_initialize_needs_two_leaders():
    with pytest.raises(HedgingError):
        ph_initialize(['SA'], hub_grid())

def test_initialize_rejects_duplicates_and_unknown():
    with pytest.raises(HedgingError):
        ph_initialize(['SA', 'SA'], hub_grid())
    with pytest.raises(HedgingError) as e:
        ph_initialize(['SA', 'SZ'], hub_grid())
    assert e.value.actor == 'SZ'

def test_options_validation():
    with pytest.raises(RecordModelError):
        PhOptions(breakpoints=1)
    with pytest.raises(RecordModelError):
        PhOptions(backend='cplex')
    assert isinstance(fast_options().mpec, MpecOptions)



## Averages & multipliers
#########################

def test_consensus_average():
    assert list(consensus_average({'SA': np.array([1.0, 2.0]), 'SB': np.array([3.0, 4.0])})) == [2.0, 3.0]
    assert list(consensus_average([[0.0], [1.0], [5.0]])) == [2.0]

def test_consensus_average_errors():
    with pytest.raises(HedgingError):
        consensus_average([])
    with pytest.raises(HedgingError):
        consensus_average([np.zeros(2), np.zeros(3)])

def test_compute_tolerance():
    values = {'SA': np.array([0.0]), 'SB': np.array([1.0])}
    assert compute_tolerance(values, consensus_average(values)) == pytest.approx(1.0)
    values = {'SA': np.array([6.0, 8.0]), 'SB': np.array([6.0, 8.0])}
    assert compute_tolerance(values, consensus_average(values)) == 0.0
    values = {'SA': np.array([0.0, 0.0]), 'SB': np.array([6.0, 16.0])}
    assert compute_tolerance(values, consensus_average(values)) == pytest.approx(2 * np.hypot(3, 8) / np.hypot(3, 8))

def test_update_multipliers():
    ph = ph_initialize(['SA', 'SB'], hub_grid())
    values = {'SA': np.zeros(6), 'SB': np.full(6, 2.0)}
    update_multipliers(ph, values, consensus_average(values))
    assert ph.multipliers['SA'] == pytest.approx(np.full(6, -0.7))
    assert ph.multipliers['SB'] == pytest.approx(np.full(6, 0.7))
    assert ph.iteration == 1
    assert list(ph.averages) == [1.0] * 6
    update_multipliers(ph, values, consensus_average(values))
    assert ph.multipliers['SB'] == pytest.approx(np.full(6, 1.4))
    assert multiplier_imbalance(ph) == pytest.approx(0.0)

def test_worker_count():
    assert available_cpus() >= 1
    assert worker_count(None, 2) == min(available_cpus(), 2)
    assert worker_count(8, 3) == 3
    assert worker_count(1, 5) == 1



## Proximal term
################

def test_proximal_minimizer():
    program = ConicProgram('prox')
    x = program.add_variable('x', -10, 10)
    penalty = add_proximal_penalty(program, x, multiplier=-5.0, mean=0.0, rho=1.0, lower=-10, upper=10, breakpoints=8)
    program.set_objective(penalty, 'min')
    result = solve(program)
    assert result.values['x'] == pytest.approx(5.0)
    assert result.objective == pytest.approx(-12.5)

def test_proximal_chords():
    program = ConicProgram()
    x = program.add_variable('x', 0, 4)
    add_proximal_penalty(program, x, 0.0, 2.0, 1.0, 0, 4, breakpoints=4, name='qx')
    assert [row.name for row in program.constraints] == [f"qx_chord{k}" for k in range(4)]
    assert program.var('qx').lb == 0.0

def test_proximal_is_exact_at_breakpoints():
    program = ConicProgram()
    x = program.add_variable('x', 0, 4)
    penalty = add_proximal_penalty(program, x, 0.0, 2.0, 2.0, 0, 4, breakpoints=4)
    program.add_constraint(x, '==', 3)
    program.set_objective(penalty, 'min')
    assert solve(program).objective == pytest.approx(1.0)

def test_proximal_without_penalty():
    program = ConicProgram()
    x = program.add_variable('x', 0, 4)
    penalty = add_proximal_penalty(program, x, 2.0, 1.0, 0.0, 0, 4)
    assert penalty.terms == {x.index: 2.0}
    assert len(program.variables) == 1

def test_proximal_needs_finite_bounds():
    program = ConicProgram()
    x = program.add_variable('x')
    with pytest.raises(HedgingError):
        add_proximal_penalty(program, x, 0.0, 0.0, 1.0, 0, float('inf'))



## Plans
########

def test_combine_plans():
    grid = hub_grid()
    plans = {
        'SA': toy_plan('SA', {'A_new': 10.0, 'B_new': 99.0}, 20.0),
        'SB': toy_plan('SB', {'B_new': 5.0}, 30.0),
    }
    consensus = {('g', 'H_gen', 'd1', 0): 42.0, ('lam', 'B', 'd1', 0): 17.0}
    plan = combine_plans(grid, plans, consensus, 'basecase')
    assert plan.kind == 'epec'
    assert plan.states == ['SA', 'SB']
    assert plan.investment == {'A_new': 10.0, 'B_new': 5.0}
    assert plan.dispatch == {'H_gen|d1|0': 42.0}
    assert plan.prices == {'B|d1|0': 17.0}
    assert plan.flows['AH|d1|0'] == pytest.approx(25.0)
    assert plan.objective == pytest.approx(2.0)
    assert set(plan.expected_dispatch) == {'A_new|d1|0', 'B_new|d1|0'}



## Equilibrium
##############

def test_augment_needs_averages():
    grid = hub_grid()
    ph = ph_initialize(['SA', 'SB'], grid)
    with pytest.raises(HedgingError):
        augment_and_solve(ph, 'SA', grid, PolicySet(), fast_options())

def test_initial_solve():
    grid = hub_grid()
    ph = ph_initialize(['SA', 'SB'], grid)
    solves = initial_solve(ph, grid, PolicySet(), fast_options())
    assert set(solves) == {'SA', 'SB'}
    for state, solve_ in solves.items():
        assert solve_.plan.kind == 'epec'
        assert solve_.values.shape == (len(ph.keys),)
        assert solve_.instance.rival_capacity == ({'B_new': 0.0} if state == 'SA' else {'A_new': 0.0})

def test_augment_and_solve():
    grid = hub_grid()
    options = fast_options()
    ph = ph_initialize(['SA', 'SB'], grid, options)
    solves = initial_solve(ph, grid, PolicySet(), options)
    values = {s: solves[s].values for s in ph.actors}
    update_multipliers(ph, values, consensus_average(values))
    previous = {s: solves[s].plan for s in ph.actors}
    solved = augment_and_solve(ph, 'SA', grid, PolicySet(), options, previous)
    assert solved.result.has_solution
    assert solved.instance.program.has_var('q(g,H_gen,d1,0)')

def test_run_ph_first_round_consensus():
    result = run_ph(['SA', 'SB'], hub_grid(), PolicySet(), fast_options(tolerance=1e-6))
    assert result.history[0].tolerance == pytest.approx(0.0, abs=1e-6)
    assert result.converged
    assert result.iterations == 1
    assert result.plan.kind == 'epec'
    assert set(result.plans) == {'SA', 'SB'}
    assert result.plan.investment == {'A_new': pytest.approx(0.0, abs=1e-6), 'B_new': pytest.approx(0.0, abs=1e-6)}
    assert len(result.consensus) == 6
    assert result.consensus[('g', 'H_gen', 'd1', 0)] == pytest.approx(80.0, abs=1e-6)
    for node in ('A', 'B', 'H'):
        assert result.consensus[('lam', node, 'd1', 0)] == pytest.approx(10.0, abs=1e-6)

def test_run_ph_round_limit():
    result = run_ph(['SA', 'SB'], hub_grid(), PolicySet(), fast_options(tolerance=0, max_iter=1))
    assert result.iterations == 1
    assert result.converged == (result.tolerance <= 0)
    table = convergence_table(result)
    assert list(table.columns) == ['iteration', 'tolerance', 'multiplier_sum', 'objective_SA', 'objective_SB']
    assert len(table) == 1
    timing = timing_table(result)
    assert len(timing) == 3
    assert set(timing['state']) == {'SA', 'SB', 'total'}



## Convergence
##############

def exporter_grid() -> GridModel:
    """A seller in SA withholding into SB's load; only SA can move the price"""
    return GridModel(
        name='exporter',
        hours=2,
        nodes=[{'id': 'A', 'state': 'SA'}, {'id': 'B', 'state': 'SB'}, {'id': 'C', 'state': 'SB'}],
        lines=[
            {'id': 'AB', 'from_node': 'A', 'to_node': 'B', 'reactance': 0.1, 'capacity': 100},
            {'id': 'BC', 'from_node': 'B', 'to_node': 'C', 'reactance': 0.1, 'capacity': 100},
        ],
        existing_gens=[{'id': 'A_gen', 'node': 'A', 'kind': 'controllable', 'g_max': 200, 'cost': 10}],
        rep_days=[{'id': 'd1', 'probability': 1.0}],
        demand={'d1': {'B': [50, 40], 'C': [20, 30]}},
    )

@pytest.mark.stress
def test_run_ph_reaches_consensus():
    grid = exporter_grid()
    started = time.perf_counter()
    result = run_ph(['SA', 'SB'], grid, PolicySet(), fast_options(tolerance=0.03, max_iter=200))
    assert time.perf_counter() - started < 900
    assert result.converged
    assert result.iterations <= 200
    assert result.tolerance <= 0.03
    assert all(record.multiplier_sum == pytest.approx(0.0, abs=1e-6) for record in result.history)
    for state, plan in result.plans.items():
        report = audit_solution(grid, plan, PolicySet(), tol=1e-6)
        assert report['passed'], format_report(report)
    for t in range(2):
        assert 10.0 - 1e-6 <= result.consensus[('lam', 'A', 'd1', t)] <= 35.0 + 1e-6
