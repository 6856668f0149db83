import pytest
import sys
import os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'src')))
from gridshift import *
from gridshift.cli import RunConfig, build_parser, exit_code, load_run_config, main, merge_config
import json



@pytest.fixture(autouse=True)
def reset_records():
    reset_record_globals()
    yield
    reset_record_globals()



def withholding_grid() -> GridModel:
    return GridModel(
        name='withholding',
        hours=1,
        nodes=[{'id': 'A', 'state': 'SA'}, {'id': 'B', 'state': 'SB'}],
        lines=[{'id': 'AB', 'from_node': 'A', 'to_node': 'B', 'reactance': 0.1, 'capacity': 100}],
        existing_gens=[{'id': 'A_gen', 'node': 'A', 'kind': 'controllable', 'g_max': 200, 'cost': 10}],
        rep_days=[{'id': 'd1', 'probability': 1.0}],
        demand={'d1': {'B': [50]}},
    )

def rps_grid() -> GridModel:
    return GridModel(
        name='rps',
        hours=1,
        nodes=[{'id': 'A', 'state': 'SA'}],
        existing_gens=[{'id': 'A_coal', 'node': 'A', 'kind': 'controllable', 'g_max': 200, 'cost': 10}],
        candidate_gens=[{'id': 'A_new_wind', 'node': 'A', 'kind': 'renewable', 'g_max': 40, 'rho': 0.5, 'capital_cost': 365000}],
        rep_days=[{'id': 'd1', 'probability': 1.0}],
        demand={'d1': {'A': [100]}},
    )

@pytest.fixture
def case(tmp_path):
    """Grid and policy files of the withholding case plus an output root"""
    save_grid(withholding_grid(), tmp_path / 'grid.json')
    (tmp_path / 'policies.json').write_text('{}')
    return tmp_path

def case_args(case, *extra: str) -> list[str]:
    return [
        '--grid', str(case / 'grid.json'), '--policies', str(case / 'policies.json'),
        '--out', str(case / 'out'), *extra,
    ]



## Run config
#############

def test_load_run_config_toml(tmp_path):
    path = tmp_path / 'run.toml'
    path.write_text('bits = 4\nprice-step = 2.5\nstates = ["SA", "SB"]\n')
    assert load_run_config(path) == {'bits': 4, 'price_step': 2.5, 'states': ['SA', 'SB']}

def test_load_run_config_errors(tmp_path):
    assert load_run_config(None) == {}
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / 'missing.toml')
    path = tmp_path / 'broken.json'
    path.write_text('{bits')
    with pytest.raises(ConfigError):
        load_run_config(path)

def test_flags_override_config(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'bits': 4, 'gap': 0.01}))
    args = build_parser().parse_args(['run-mpec', '--config', str(path), '--bits', '6', '--state', 'SA'])
    config = merge_config(args)
    assert config.bits == 6
    assert config.gap == 0.01
    assert config.state == 'SA'
    assert config.solver_options().gap == 0.01
    assert config.mpec_options().bits == 6

def test_unknown_config_key(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'bitz': 4}))
    args = build_parser().parse_args(['run-mpec', '--config', str(path)])
    with pytest.raises(ConfigError):
        merge_config(args)

def test_run_config_validation():
    with pytest.raises(RecordError):
        RunConfig(bits=40)
    with pytest.raises(RecordError):
        RunConfig(backend='cplex')
    with pytest.raises(RecordError):
        RunConfig(samples=5000)
    options = RunConfig(eps=0.1, jobs=2, no_chance_constraints=True).ph_options()
    assert options.tolerance == 0.1
    assert options.jobs == 2
    assert not options.mpec.chance_constraints

def test_exit_codes():
    assert exit_code(RpsInfeasibleError('SA', 'd1', 25.0, 20.0)) == 3
    assert exit_code(HedgingError('stuck', actor='SA', status='infeasible')) == 3
    assert exit_code(HedgingError('stuck', actor='SA', status='node_limit')) == 4
    assert exit_code(HedgingError('bad leaders')) == 2
    assert exit_code(SolverError('crashed')) == 4
    assert exit_code(ProgramError('bad row')) == 4
    assert exit_code(GridDataError('bad grid')) == 2



## Commands
###########

def test_export_market(case, capsys):
    assert main(['export', *case_args(case, '--program', 'market', '--run-id', 'lp')]) == 0
    path = case / 'out' / 'lp' / 'market.lp'
    assert path.exists()
    assert 'balance(B,0)' in [row.name for row in read_lp_file(path).constraints]
    assert 'wrote' in capsys.readouterr().out

def test_export_mpec_needs_state(case):
    assert main(['export', *case_args(case, '--program', 'mpec')]) == 2

def test_unknown_config_key_exit(case):
    config = case / 'run.json'
    config.write_text(json.dumps({'bitz': 4}))
    assert main(['run-mpec', *case_args(case, '--config', str(config), '--state', 'SA')]) == 2

def test_run_mpec_needs_state(case):
    assert main(['run-mpec', *case_args(case)]) == 2

def test_run_mpec_unknown_state(case):
    assert main(['run-mpec', *case_args(case, '--state', 'SZ')]) == 2

def test_run_mpec_missing_grid(tmp_path):
    assert main(['run-mpec', '--grid', str(tmp_path / 'nope.json'), '--state', 'SA', '--out', str(tmp_path)]) == 2

def test_run_mpec_rps_infeasible(tmp_path):
    save_grid(rps_grid(), tmp_path / 'grid.json')
    (tmp_path / 'policies.json').write_text(json.dumps({'SA': {'rps': 0.25}}))
    argv = ['run-mpec', '--grid', str(tmp_path / 'grid.json'), '--policies', str(tmp_path / 'policies.json'),
            '--state', 'SA', '--out', str(tmp_path / 'out')]
    assert main(argv) == 3

def test_run_mpec_writes_results(case, capsys):
    argv = ['run-mpec', *case_args(case, '--state', 'SA', '--bits', '3', '--price-step', '5', '--run-id', 'sa')]
    assert main(argv) == 0
    out = case / 'out' / 'sa'
    for name in ('result.json', 'expansion.csv', 'costs.csv', 'audit.json'):
        assert (out / name).exists()
    result = json.loads((out / 'result.json').read_text())
    assert result['command'] == 'run-mpec'
    assert result['objective'] == pytest.approx(1250.0, abs=1e-3)
    plan = Plan(**result['plan'])
    assert plan.kind == 'mpec'
    assert plan.prices['A|d1|0'] == pytest.approx(35.0, abs=1e-6)
    assert 'results written to' in capsys.readouterr().out

def test_default_run_id(case):
    assert main(['run-mpec', *case_args(case, '--state', 'SA', '--bits', '3', '--price-step', '5')]) == 0
    assert (case / 'out' / 'mpec-SA-basecase' / 'result.json').exists()

def test_benchmark_with_comparison(case):
    assert main(['run-mpec', *case_args(case, '--state', 'SA', '--bits', '3', '--price-step', '5', '--run-id', 'sa')]) == 0
    argv = ['run-benchmark', *case_args(case, '--run-id', 'bench', '--compare', str(case / 'out' / 'sa'))]
    assert main(argv) == 0
    out = case / 'out' / 'bench'
    result = json.loads((out / 'result.json').read_text())
    assert result['plan']['kind'] == 'benchmark'
    assert (out / 'comparison.csv').exists()

def test_validate_needs_result(case):
    assert main(['validate', *case_args(case)]) == 2
    assert main(['validate', *case_args(case, '--result', str(case / 'missing'))]) == 2

def test_validate_uses_each_state_risk_level(case):
    (case / 'policies.json').write_text(json.dumps({'SA': {'security': 0.05}, 'SB': {'security': 0.1}}))
    plan = Plan(
        kind='epec', states=['SA', 'SB'], objective=0.0, objectives={'SA': 0.0, 'SB': 0.0},
        expected_dispatch={'A_gen|d1|0': 50.0},
    )
    (case / 'result.json').write_text(json.dumps({'plan': plan.serialize()}))
    argv = ['validate', *case_args(case, '--result', str(case / 'result.json'), '--samples', '10000', '--run-id', 'v')]
    assert main(argv) == 0
    report = json.loads((case / 'out' / 'v' / 'validation.json').read_text())
    assert report['monte_carlo']['eta'] == {'SA': 0.05, 'SB': 0.1}
    assert {e['eta'] for e in report['monte_carlo']['entries']} == {0.05}
    assert report['monte_carlo']['passed']

def test_program_error_exit(case, monkeypatch):
    def broken(*args, **kwargs):
        raise ProgramError('row refers to a missing variable')
    monkeypatch.setattr('gridshift.cli.build_mpec', broken)
    assert main(['run-mpec', *case_args(case, '--state', 'SA')]) == 4

def test_run_epec_writes_tables(tmp_path, capsys):
    grid = GridModel(
        name='hub',
        hours=1,
        nodes=[{'id': 'A', 'state': 'SA'}, {'id': 'B', 'state': 'SB'}, {'id': 'H', 'state': 'SH'}],
        lines=[
            {'id': 'AH', 'from_node': 'A', 'to_node': 'H', 'reactance': 0.1, 'capacity': 100},
            {'id': 'BH', 'from_node': 'B', 'to_node': 'H', 'reactance': 0.1, 'capacity': 100},
        ],
        existing_gens=[{'id': 'H_gen', 'node': 'H', 'kind': 'controllable', 'g_max': 200, 'cost': 10}],
        rep_days=[{'id': 'd1', 'probability': 1.0}],
        demand={'d1': {'A': [40], 'B': [40]}},
    )
    save_grid(grid, tmp_path / 'grid.json')
    (tmp_path / 'policies.json').write_text('{}')
    argv = ['run-epec', '--grid', str(tmp_path / 'grid.json'), '--policies', str(tmp_path / 'policies.json'),
            '--out', str(tmp_path / 'out'), '--bits', '3', '--price-step', '5', '--eps', '1e-6', '--jobs', '1', '--states', 'SA', 'SB']
    assert main(argv) == 0
    out = tmp_path / 'out' / 'epec-basecase'
    result = json.loads((out / 'result.json').read_text())
    assert result['converged'] and result['iterations'] == 1
    assert set(result['plans']) == {'SA', 'SB'}
    audit = json.loads((out / 'audit.json').read_text())
    assert set(audit) == {'combined', 'actors'}
    assert (out / 'convergence.csv').exists() and (out / 'timings.csv').exists()
    assert 'equilibrium converged' in capsys.readouterr().out

def test_run_epec_needs_two_states(case):
    assert main(['run-epec', *case_args(case, '--states', 'SA')]) == 2
