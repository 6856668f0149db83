"""Solved expansion plans shared by every solver front end"""

from __future__ import annotations

from typing import Literal
import math

import pandas as pd

from .grid_model import CandidateGenerator, GridModel, PolicySet
from .records import Record, RecordField

KEY_SEPARATOR = '|'



def plan_key(*parts: object) -> str:
    return KEY_SEPARATOR.join(str(p) for p in parts)

def split_key(key: str) -> tuple[str, str, int]:
    """(item, day, hour) of a `item|day|hour` key"""
    item, day, hour = key.split(KEY_SEPARATOR)
    return item, day, int(hour)



class Plan(Record):
    """Investments and operation of one solve

    Keys of the series dicts are `item|day|hour`. expected_dispatch and imports cover the
    planning states only; dispatch, flows, angles and prices describe the whole market.
    """
    kind: Literal['mpec', 'epec', 'benchmark']
    scenario: str = 'basecase'
    states: list[str] = RecordField(min_len=1)
    status: str = 'optimal'
    objective: float = 0.0
    objectives: dict[str, float] = RecordField(default_factory=dict)
    chance_constrained: bool = True
    investment: dict[str, float] = RecordField(default_factory=dict)
    expected_dispatch: dict[str, float] = RecordField(default_factory=dict)
    imports: dict[str, float] = RecordField(default_factory=dict)
    dispatch: dict[str, float] = RecordField(default_factory=dict)
    flows: dict[str, float] = RecordField(default_factory=dict)
    angles: dict[str, float] = RecordField(default_factory=dict)
    prices: dict[str, float] = RecordField(default_factory=dict)

    def capacity(self, grid: GridModel, gen_id: str) -> float:
        """Installed capacity: g_max for existing units, the planned investment for candidates"""
        gen = grid.gen(gen_id)
        if isinstance(gen, CandidateGenerator):
            return self.investment.get(gen_id, 0.0)
        return gen.g_max



def expansion_summary(plan: Plan, grid: GridModel) -> pd.DataFrame:
    """New capacity per state and kind, GW"""
    rows = []
    for state in grid.states:
        built = {'controllable': 0.0, 'renewable': 0.0}
        for gen in grid.gens_in_state(state, candidates=True):
            built[gen.kind] += plan.investment.get(gen.id, 0.0)
        rows.append({
            'state': state,
            'controllable_gw': built['controllable'] / 1000.0,
            'renewable_gw': built['renewable'] / 1000.0,
        })
    return pd.DataFrame(rows, columns=['state', 'controllable_gw', 'renewable_gw'])

def cost_summary(plan: Plan, grid: GridModel, policies: PolicySet) -> pd.DataFrame:
    """Daily investment and expected operating cost per planning state, $"""
    operating = {state: 0.0 for state in plan.states}
    series = plan.expected_dispatch or plan.dispatch
    for key, value in series.items():
        gen_id, day, _ = split_key(key)
        gen = grid.gen(gen_id)
        state = grid.state_of(gen)
        if state in operating:
            operating[state] += grid.probability(day) * gen.cost * value

    rows = []
    for state in plan.states:
        investment = math.fsum(
            policies.capital_cost(gen) * plan.investment.get(gen.id, 0.0)
            for gen in grid.gens_in_state(state, candidates=True)
        )
        rows.append({
            'state': state,
            'investment_cost': investment,
            'operating_cost': operating[state],
            'total_cost': investment + operating[state],
        })
    return pd.DataFrame(rows, columns=['state', 'investment_cost', 'operating_cost', 'total_cost'])

