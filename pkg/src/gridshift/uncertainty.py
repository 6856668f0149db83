"""Gaussian renewable forecast errors, affine recourse and their exact conic form

Controllable generator i of state s follows g = gbar - alpha_i * sum_j eps_j over the renewables j
of s, with eps_j ~ N(cap_j * upsilon_j, (cap_j * sigma_j)^2) independent. Each bound
P[g <= Gmax] >= 1 - eta (and the three siblings) becomes

    z * alpha_i * y = Gmax - gbar + alpha_i * M,     [y; cap_1 sigma_1, ..., cap_n sigma_n] in K

with z the (1 - eta) standard normal quantile and M = sum_j cap_j * upsilon_j.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math

import numpy as np
import scipy.special

from .conic_program import ConicProgram, LinExpr, LinearConstraint, SocConstraint, Variable, as_expr, var_name
from .errors import UncertaintyError
from .grid_model import CandidateGenerator, Generator, GridModel

logger = logging.getLogger(__name__)

PARTICIPATION_TOLERANCE = 1e-9



## Scalars
##########

def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF"""
    if not (isinstance(p, (int, float)) and 0.0 < p < 1.0):
        raise UncertaintyError(f"quantile probability must lie in (0, 1), got {p}")
    return float(scipy.special.ndtri(p))

def forecast_stdev(alpha: float, entries: list[tuple[float, float]]) -> float:
    """Stdev of alpha * sum of independent errors with stdev capacity * sigma"""
    if alpha < 0:
        raise UncertaintyError(f"participation factor must be non-negative, got {alpha}")
    return alpha * math.hypot(*(cap * sigma for cap, sigma in entries)) if entries else 0.0



## Affine policy
################

@dataclass
class AffinePolicy:
    """Participation factors of a state's controllable generators (candidates included)"""
    state: str
    alpha: dict[str, float] = field(default_factory=dict)

    def of(self, gen_id: str) -> float:
        return self.alpha.get(gen_id, 0.0)

def build_affine_policy(grid: GridModel, state: str, participation: dict[str, float] | None = None) -> AffinePolicy:
    """Participation factors from the argument, the generator records, or 1/card(existing controllables)"""
    controllables = grid.gens_in_state(state, 'controllable')
    if participation is not None:
        alpha = {g.id: float(participation.get(g.id, 0.0)) for g in controllables}
    elif any(g.participation is not None for g in controllables):
        alpha = {g.id: float(g.participation or 0.0) for g in controllables}
    else:
        existing = [g for g in controllables if not isinstance(g, CandidateGenerator)]
        existing_ids = {g.id for g in existing}
        alpha = {g.id: (1.0 / len(existing) if g.id in existing_ids else 0.0) for g in controllables}

    for gen_id, value in alpha.items():
        if value < 0:
            raise UncertaintyError(f"{state}: participation of `{gen_id}` is negative ({value})")

    uncertain = [
        r for r in grid.gens_in_state(state, 'renewable')
        if any(grid.sigma(r, day, t) > 0 for day in grid.day_ids for t in range(grid.hours))
    ]
    total = math.fsum(alpha.values())
    if not alpha or total == 0:
        if uncertain:
            raise UncertaintyError(f"{state}: no controllable generator participates in balancing forecast errors of {[r.id for r in uncertain]}")
        return AffinePolicy(state, alpha)
    if abs(total - 1.0) > PARTICIPATION_TOLERANCE:
        raise UncertaintyError(f"{state}: participation factors sum to {total:.12g}, expected 1")
    return AffinePolicy(state, alpha)



## Cone blocks
##############

@dataclass
class SocBlock:
    """One chance-constrained bound of a controllable generator at (day, hour)

    head is None for units with zero participation, whose bound is the deterministic row.
    """
    gen: str
    day: str
    hour: int
    side: str
    definition: LinearConstraint
    head: Variable | None = None
    tail: list[LinExpr] = field(default_factory=list)
    cone: SocConstraint | None = None

def _capacity(gen: Generator, capacity_vars: dict[str, Variable | LinExpr | float]) -> LinExpr:
    if isinstance(gen, CandidateGenerator):
        if gen.id not in capacity_vars:
            raise UncertaintyError(f"no capacity variable for candidate `{gen.id}`")
        return as_expr(capacity_vars[gen.id])
    return as_expr(gen.g_max)

def error_terms(
    grid: GridModel,
    state: str,
    day: str,
    t: int,
    capacity_vars: dict[str, Variable | LinExpr | float],
) -> tuple[list[LinExpr], LinExpr]:
    """Tail entries cap*sigma (non-zero sigma only) and the mean shift sum cap*upsilon"""
    tail: list[LinExpr] = []
    mean = LinExpr()
    for r in grid.gens_in_state(state, 'renewable'):
        cap = _capacity(r, capacity_vars)
        sigma = grid.sigma(r, day, t)
        upsilon = grid.upsilon(r, day, t)
        if sigma > 0:
            tail.append(cap * sigma)
        if upsilon:
            mean = mean + cap * upsilon
    return tail, mean

def build_soc_constraints(
    program: ConicProgram,
    grid: GridModel,
    state: str,
    policy: AffinePolicy,
    capacity_vars: dict[str, Variable | LinExpr | float],
    dispatch_vars: dict[tuple[str, str, int], Variable | LinExpr],
    eta: float,
    prefix: str = '',
) -> list[SocBlock]:
    """Add the conic form of the four generation-limit chance constraints of a state's controllables"""
    z = normal_quantile(1.0 - eta)
    blocks: list[SocBlock] = []
    controllables = grid.gens_in_state(state, 'controllable')

    for day in grid.day_ids:
        for t in range(grid.hours):
            tail, mean = error_terms(grid, state, day, t, capacity_vars)
            for gen in controllables:
                key = (gen.id, day, t)
                if key not in dispatch_vars:
                    raise UncertaintyError(f"no dispatch variable for `{gen.id}` on `{day}` hour {t}")
                gbar = as_expr(dispatch_vars[key])
                if isinstance(gen, CandidateGenerator):
                    cap = _capacity(gen, capacity_vars)
                    upper, lower = cap, cap * gen.min_output
                else:
                    upper, lower = as_expr(gen.g_max), as_expr(gen.g_min)
                alpha = policy.of(gen.id)

                if alpha <= 0:
                    row_up = program.add_constraint(gbar, '<=', upper, name=var_name(f"{prefix}gmax", gen.id, day, t))
                    row_lo = program.add_constraint(gbar, '>=', lower, name=var_name(f"{prefix}gmin", gen.id, day, t))
                    blocks.append(SocBlock(gen.id, day, t, 'upper', row_up))
                    blocks.append(SocBlock(gen.id, day, t, 'lower', row_lo))
                    continue

                for side, slack in (('upper', upper - gbar + mean * alpha), ('lower', gbar - mean * alpha - lower)):
                    head = program.add_variable(var_name(f"{prefix}y{side}", gen.id, day, t), lb=0.0)
                    definition = program.add_constraint(head * (z * alpha), '==', slack, name=var_name(f"{prefix}ydef{side}", gen.id, day, t))
                    cone = None
                    if tail:
                        cone = program.add_cone(head, tail, name=var_name(f"{prefix}cone{side}", gen.id, day, t))
                    blocks.append(SocBlock(gen.id, day, t, side, definition, head, tail, cone))

    logger.debug("%s: %d chance-constraint blocks (z=%.6f)", state, len(blocks), z)
    return blocks

def chance_margins(
    grid: GridModel,
    state: str,
    policy: AffinePolicy,
    capacities: dict[str, float],
    dispatch: dict[tuple[str, str, int], float],
    eta: float,
) -> list[dict[str, float | str | int]]:
    """Numeric y, ||x|| and y - ||x|| of every bound for a fixed plan; negative margins are violations"""
    z = normal_quantile(1.0 - eta)
    caps = {g.id: capacities.get(g.id, 0.0) for g in grid.candidate_gens}
    rows = []
    for day in grid.day_ids:
        for t in range(grid.hours):
            tail, mean = error_terms(grid, state, day, t, caps)
            norm = math.hypot(*(e.constant for e in tail)) if tail else 0.0
            shift = mean.constant
            for gen in grid.gens_in_state(state, 'controllable'):
                gbar = dispatch[(gen.id, day, t)]
                if isinstance(gen, CandidateGenerator):
                    upper = capacities.get(gen.id, 0.0)
                    lower = gen.min_output * upper
                else:
                    upper, lower = gen.g_max, gen.g_min
                alpha = policy.of(gen.id)
                for side, slack in (('upper', upper - gbar + alpha * shift), ('lower', gbar - alpha * shift - lower)):
                    if alpha > 0:
                        y = slack / (z * alpha)
                        rows.append({'gen': gen.id, 'day': day, 'hour': t, 'side': side, 'y': y, 'norm': norm, 'margin': y - norm})
                    else:
                        rows.append({'gen': gen.id, 'day': day, 'hour': t, 'side': side, 'y': slack, 'norm': 0.0, 'margin': slack})
    return rows



## Sampling
###########

def sample_errors(
    grid: GridModel,
    day: str,
    seed: int,
    n: int,
    state: str | None = None,
    capacities: dict[str, float] | None = None,
) -> tuple[list[str], np.ndarray]:
    """Draw n forecast-error scenarios for the renewables (of one state, or all)

    Returns the generator ids and an array of shape (n, hours, len(ids)). Each generator draws
    from its own child of SeedSequence([seed, day index]), so a unit's samples do not depend on
    which other units are sampled. Candidates use `capacities` (0 when absent).
    """
    if n < 1:
        raise UncertaintyError(f"sample count must be at least 1, got {n}")
    if day not in grid.day_ids:
        raise UncertaintyError(f"unknown representative day `{day}`")
    capacities = capacities or {}
    day_index = grid.day_ids.index(day)
    streams = np.random.SeedSequence([seed, day_index]).spawn(len(grid.all_gens))

    ids: list[str] = []
    columns: list[np.ndarray] = []
    for position, gen in enumerate(grid.all_gens):
        if gen.kind != 'renewable' or (state is not None and grid.state_of(gen) != state):
            continue
        cap = capacities.get(gen.id, 0.0) if isinstance(gen, CandidateGenerator) else gen.g_max
        mean = np.array([cap * grid.upsilon(gen, day, t) for t in range(grid.hours)])
        stdev = np.array([cap * grid.sigma(gen, day, t) for t in range(grid.hours)])
        rng = np.random.default_rng(streams[position])
        columns.append(rng.normal(mean, stdev, size=(n, grid.hours)))
        ids.append(gen.id)

    if not columns:
        return ids, np.zeros((n, grid.hours, 0))
    return ids, np.stack(columns, axis=2)
