# Errors
from .errors import GridshiftError, GridDataError, PolicyError, ConfigError, UncertaintyError, MarketError, MpecError, RpsInfeasibleError
from .errors import HedgingError, BenchmarkError, ScenarioMismatchError, ProgramError, SolverError, LpFormatError

# Records
## Errors & metadata
from .records import RecordError, RecordModelError, RecordFieldError, RecordTypeMismatchError
from .records import Missing, RecordConfig, DEFAULT_RECORD_CONFIG, RecordFieldInfo, RecordInfo, RecordField
## Types & hooks
from .records import RecordType, get_record_type, record_transformer, record_validator
from .records import record_function_wrapper, record_init_function_wrapper
## Classes & utilities
from .records import Record, get_record_config, get_fields, get_record_info
from .records import register_record_type, clear_record_info_registry, reset_record_globals, serialize

# Grid data
from .grid_model import Node, Line, RepDay, Generator, CandidateGenerator, Forecast, GridModel
from .grid_model import RetirementScenario, RETIREMENT_PRESETS, retirement_by_fuel, preset_retirement, apply_retirement, select_horizon
from .grid_model import prorate_capital_cost, Economics, ActorPolicy, PolicySet
from .grid_model import BUNDLED_DATA, resolve_data_path, load_grid, save_grid, load_policies

# Uncertainty
from .uncertainty import normal_quantile, forecast_stdev, AffinePolicy, build_affine_policy
from .uncertainty import SocBlock, error_terms, build_soc_constraints, chance_margins, sample_errors

# Programs & solvers
from .conic_program import Variable, LinExpr, as_expr, LinearConstraint, SocConstraint, Sos1Set, ConicProgram
from .conic_program import STATUSES, SolveStats, SolveResult, var_name
from .solver import SolverOptions, compile_program, solve_lp, soc_violation_cut, branch_and_bound, solve
from .lp_format import lp_text, write_lp_file, read_lp_text, read_lp_file, write_solution_file, read_solution_file, ExternalSolver

# Market
from .market import build_offers, reference_nodes, component_labels, check_islands, theta_bound
from .market import MarketLp, build_market_lp, MarketSolution, solve_market, extract_market_solution
from .market import KktBounds, KktBlock, add_market_kkt, KktSystem, build_kkt_system, kkt_solution, verify_kkt_point

# Strategic models
from .plan import KEY_SEPARATOR, plan_key, split_key, Plan, expansion_summary, cost_summary
from .mpec import MpecOptions, PriceExpansion, expand_price, add_price_expansion, linearize_bilinear_price, sos1_complementarity
from .mpec import rps_precheck, ProductTerm, MpecInstance, capacity_upper_bound, build_mpec, hedge_keys, bilinear_product_terms, extract_plan
from .hedging import PhOptions, PhState, ActorSolve, PhIteration, EquilibriumResult
from .hedging import ph_initialize, consensus_average, compute_tolerance, update_multipliers, multiplier_imbalance, add_proximal_penalty
from .hedging import available_cpus, worker_count
from .hedging import initial_solve, augment_and_solve, run_ph, combine_plans, convergence_table, timing_table
from .benchmark import default_reserve_requirement, BenchmarkInstance, build_benchmark, solve_benchmark, extract_benchmark_plan, compare_expansion

# Validation
from .validation import monte_carlo_cc_check, lp_vs_kkt_equivalence, audit_solution, format_report

__version__ = '0.1.0b0'
