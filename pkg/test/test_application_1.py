import pytest
import sys
import os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'src')))
from gridshift import *
from gridshift.cli import main
import json



@pytest.fixture(autouse=True)
def reset_records():
    reset_record_globals()
    yield
    reset_record_globals()



def iso_ne(hours: int = 2, scenario: str = 'basecase') -> tuple[GridModel, PolicySet]:
    """The bundled New England case cut to the first hours of the summer day"""
    grid = load_grid('iso-ne')
    grid = apply_retirement(grid, preset_retirement(grid, scenario))
    grid = select_horizon(grid, hours, ['summer'])
    policies = load_policies('iso-ne')
    policies.check_grid(grid)
    return grid, policies



## Horizon
##########

@pytest.mark.application
def test_short_horizon():
    grid, _ = iso_ne()
    assert grid.hours == 2
    assert grid.day_ids == ['summer']
    assert grid.probability('summer') == 1.0
    assert grid.state_demand('CT', 'summer') == pytest.approx(3435.5, abs=0.1)



## Centralized benchmark
########################

@pytest.mark.application
def test_benchmark_plan():
    grid, policies = iso_ne()
    _, result, plan = solve_benchmark(grid, policies)
    assert result.has_solution
    assert plan.states == grid.states
    report = audit_solution(grid, plan, policies)
    assert report['passed'], format_report(report)
    for state in grid.states:
        required = policies.policy(state).rps * grid.state_demand(state, 'summer')
        renewable = sum(
            plan.dispatch.get(plan_key(g.id, 'summer', t), 0.0)
            for g in grid.gens_in_state(state, kind='renewable') for t in range(grid.hours)
        )
        assert renewable >= required - 1e-4
    table = expansion_summary(plan, grid)
    assert list(table['state']) == grid.states
    assert (table[['controllable_gw', 'renewable_gw']] >= -1e-9).all().all()

@pytest.mark.application
def test_coal_retirement_benchmark():
    grid, policies = iso_ne(scenario='coal')
    assert 'NH_coal' in grid.retired
    _, result, plan = solve_benchmark(grid, policies, scenario='coal')
    assert result.has_solution
    assert plan.scenario == 'coal'
    assert not any(key.startswith(('NH_coal', 'CT_coal')) for key in plan.dispatch)



## Strategic programs
#####################

@pytest.mark.application
def test_mpec_structure():
    grid, policies = iso_ne(hours=1)
    inst = build_mpec(grid, policies, 'RI', options=MpecOptions(bits=4))
    assert set(inst.capacity) == {'RI_new_gas', 'RI_new_wind', 'RI_new_solar'}
    assert list(inst.kkt) == ['summer']
    assert len(inst.program.binaries) == 4 * len(inst.expansions)
    assert inst.program.cones

@pytest.mark.application
@pytest.mark.stress
def test_mpec_plan_passes_audit():
    grid, policies = iso_ne(hours=2)
    inst = build_mpec(grid, policies, 'RI', options=MpecOptions(bits=6))
    result = solve(inst.program, SolverOptions(time_limit=600))
    assert result.has_solution
    assert result.status in ('optimal', 'gap_limit')
    plan = extract_plan(inst, result)
    report = audit_solution(grid, plan, policies)
    assert report['passed'], format_report(report)
    assert report['families']['rps']['passed']
    assert report['families']['budgets']['passed']

@pytest.mark.application
def test_export_mpec(tmp_path):
    argv = ['export', '--program', 'mpec', '--state', 'RI', '--hours', '1', '--days', 'summer',
            '--bits', '2', '--out', str(tmp_path), '--run-id', 'ri']
    assert main(argv) == 0
    program = read_lp_file(tmp_path / 'ri' / 'mpec-RI.lp')
    assert program.binaries
    assert program.cones



## Market oracle
################

@pytest.mark.stress
def test_lp_vs_kkt_on_iso_ne():
    grid, _ = iso_ne(hours=1)
    report = lp_vs_kkt_equivalence(grid, build_offers(grid, None, {}), 'summer')
    assert report['passed'], format_report(report)

@pytest.mark.stress
def test_run_benchmark_command(tmp_path):
    argv = ['run-benchmark', '--hours', '2', '--days', 'summer', '--out', str(tmp_path), '--run-id', 'bench']
    assert main(argv) == 0
    result = json.loads((tmp_path / 'bench' / 'result.json').read_text())
    assert result['plan']['kind'] == 'benchmark'
    assert json.loads((tmp_path / 'bench' / 'audit.json').read_text())['passed']
