"""Grid, generator and policy records plus their file formats

A GridModel is immutable once validated and is shared read-only by every builder.
Hours are indexed from 0 to hours - 1 in files and in variable names.
"""

from __future__ import annotations

from functools import cached_property
from pathlib import Path
from typing import Any, Literal
import json
import logging
import math
import sys

import pandas as pd

from .errors import GridDataError, PolicyError
from .records import Record, RecordField, record_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

ID_PATTERN = r'^[A-Za-z][A-Za-z0-9_.]*$'
PROBABILITY_TOLERANCE = 1e-9
BUNDLED_DATA = Path(__file__).parent / "data"



## Network
##########

class Node(Record):
    id: str = RecordField(pattern=ID_PATTERN)
    state: str = RecordField(pattern=ID_PATTERN)

class Line(Record):
    id: str = RecordField(pattern=ID_PATTERN)
    from_node: str
    to_node: str
    reactance: float = RecordField(gt=0)
    capacity: float = RecordField(ge=0)

    def __post_init__(self):
        if self.from_node == self.to_node:
            raise GridDataError(f"line `{self.id}` connects node `{self.from_node}` to itself")

class RepDay(Record):
    id: str = RecordField(pattern=ID_PATTERN)
    probability: float = RecordField(ge=0, le=1)



## Generators
#############

class Generator(Record):
    """An existing generating unit

    ramp_down / ramp_up are magnitudes in MW/h (None = unlimited); rho, sigma and upsilon are
    defaults used when the forecast tables carry no series for the unit.
    """
    id: str = RecordField(pattern=ID_PATTERN)
    node: str
    kind: Literal['renewable', 'controllable']
    fuel: str = ''
    g_min: float = RecordField(default=0.0, ge=0)
    g_max: float = RecordField(ge=0)
    ramp_down: float | None = RecordField(default=None, ge=0)
    ramp_up: float | None = RecordField(default=None, ge=0)
    cost: float = RecordField(default=0.0, ge=0)
    rho: float = RecordField(default=1.0, ge=0, le=1)
    sigma: float = RecordField(default=0.0, ge=0)
    upsilon: float = 0.0
    reserve: float = RecordField(default=0.0, ge=0)
    participation: float | None = RecordField(default=None, ge=0, le=1)

    def __post_init__(self):
        if self.g_min > self.g_max:
            raise GridDataError(f"generator `{self.id}`: g_min {self.g_min} exceeds g_max {self.g_max}")
        if self.kind == 'renewable' and self.participation:
            raise GridDataError(f"renewable generator `{self.id}` cannot carry a participation factor")
        if self.kind == 'controllable' and (self.sigma or self.upsilon):
            raise GridDataError(f"controllable generator `{self.id}` cannot carry forecast errors")

    @property
    def is_renewable(self) -> bool:
        return self.kind == 'renewable'

class CandidateGenerator(Generator):
    """A generator that may be built; g_max is the largest buildable capacity"""
    capital_cost: float = RecordField(default=0.0, ge=0)
    min_output: float = RecordField(default=0.0, ge=0, le=1)



## Forecast tables
##################

class Forecast(Record):
    """Per (day, generator) hourly series overriding the generator defaults"""
    rho: dict[str, dict[str, list[float]]] = RecordField(default_factory=dict)
    sigma: dict[str, dict[str, list[float]]] = RecordField(default_factory=dict)
    upsilon: dict[str, dict[str, list[float]]] = RecordField(default_factory=dict)

    @record_validator('rho')
    def _validate_rho(self, val: dict) -> bool:
        for day, series in val.items():
            for gen, values in series.items():
                if any(v < 0 or v > 1 for v in values):
                    raise GridDataError(f"forecast rho for `{gen}` on `{day}` leaves [0, 1]")
        return True

    @record_validator('sigma')
    def _validate_sigma(self, val: dict) -> bool:
        for day, series in val.items():
            for gen, values in series.items():
                if any(v < 0 for v in values):
                    raise GridDataError(f"forecast sigma for `{gen}` on `{day}` is negative")
        return True



## Grid
#######

class GridModel(Record):
    name: str = 'grid'
    hours: int = RecordField(gt=0)
    nodes: list[Node] = RecordField(min_len=1)
    lines: list[Line] = RecordField(default_factory=list)
    existing_gens: list[Generator] = RecordField(default_factory=list)
    candidate_gens: list[CandidateGenerator] = RecordField(default_factory=list)
    rep_days: list[RepDay] = RecordField(min_len=1)
    demand: dict[str, dict[str, list[float]]] = RecordField(default_factory=dict)
    forecast: Forecast = RecordField(default_factory=Forecast)
    retired: list[str] = RecordField(default_factory=list)

    def __post_init__(self):
        self._check_unique("node", [n.id for n in self.nodes])
        self._check_unique("line", [l.id for l in self.lines])
        self._check_unique("generator", [g.id for g in self.all_gens])
        self._check_unique("representative day", [d.id for d in self.rep_days])

        nodes = set(self.node_index)
        for line in self.lines:
            for end in (line.from_node, line.to_node):
                if end not in nodes:
                    raise GridDataError(f"line `{line.id}` references unknown node `{end}`")
        for gen in self.all_gens:
            if gen.node not in nodes:
                raise GridDataError(f"generator `{gen.id}` references unknown node `{gen.node}`")

        total = math.fsum(d.probability for d in self.rep_days)
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            raise GridDataError(f"representative day probabilities sum to {total:.12g}, expected 1")

        days = set(self.day_ids)
        for day, by_node in self.demand.items():
            if day not in days:
                raise GridDataError(f"demand references unknown representative day `{day}`")
            for node, series in by_node.items():
                if node not in nodes:
                    raise GridDataError(f"demand references unknown node `{node}`")
                if len(series) != self.hours:
                    raise GridDataError(f"demand of `{node}` on `{day}` has {len(series)} values, expected {self.hours}")
                if any(v < 0 for v in series):
                    raise GridDataError(f"demand of `{node}` on `{day}` is negative")

        gens = {g.id for g in self.all_gens}
        for table_name in ('rho', 'sigma', 'upsilon'):
            for day, by_gen in getattr(self.forecast, table_name).items():
                if day not in days:
                    raise GridDataError(f"forecast {table_name} references unknown representative day `{day}`")
                for gen, series in by_gen.items():
                    if gen not in gens:
                        raise GridDataError(f"forecast {table_name} references unknown generator `{gen}`")
                    if len(series) != self.hours:
                        raise GridDataError(f"forecast {table_name} of `{gen}` on `{day}` has {len(series)} values, expected {self.hours}")

    @staticmethod
    def _check_unique(what: str, ids: list[str]) -> None:
        seen = set()
        for item in ids:
            if item in seen:
                raise GridDataError(f"duplicate {what} id `{item}`")
            seen.add(item)



    ## Lookups
    ##########

    @cached_property
    def node_index(self) -> dict[str, int]:
        return {n.id: i for i, n in enumerate(self.nodes)}

    @cached_property
    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    @cached_property
    def states(self) -> list[str]:
        """States in order of first appearance among the nodes"""
        return list(dict.fromkeys(n.state for n in self.nodes))

    @cached_property
    def day_ids(self) -> list[str]:
        return [d.id for d in self.rep_days]

    @cached_property
    def all_gens(self) -> list[Generator]:
        return [*self.existing_gens, *self.candidate_gens]

    @cached_property
    def _gen_lookup(self) -> dict[str, Generator]:
        return {g.id: g for g in self.all_gens}

    @cached_property
    def _node_state(self) -> dict[str, str]:
        return {n.id: n.state for n in self.nodes}

    def gen(self, gen_id: str) -> Generator:
        try:
            return self._gen_lookup[gen_id]
        except KeyError:
            raise GridDataError(f"unknown generator `{gen_id}`")

    def is_candidate(self, gen_id: str) -> bool:
        return isinstance(self.gen(gen_id), CandidateGenerator)

    def state_of_node(self, node_id: str) -> str:
        try:
            return self._node_state[node_id]
        except KeyError:
            raise GridDataError(f"unknown node `{node_id}`")

    def state_of(self, gen: Generator | str) -> str:
        if isinstance(gen, str):
            gen = self.gen(gen)
        return self._node_state[gen.node]

    def nodes_in_state(self, state: str) -> list[str]:
        return [n.id for n in self.nodes if n.state == state]

    def gens_in_state(self, state: str, kind: str | None = None, candidates: bool | None = None) -> list[Generator]:
        result = []
        for gen in self.all_gens:
            if self._node_state[gen.node] != state:
                continue
            if kind is not None and gen.kind != kind:
                continue
            if candidates is not None and isinstance(gen, CandidateGenerator) != candidates:
                continue
            result.append(gen)
        return result

    def gens_at_node(self, node_id: str) -> list[Generator]:
        return [g for g in self.all_gens if g.node == node_id]

    def probability(self, day: str) -> float:
        for d in self.rep_days:
            if d.id == day:
                return d.probability
        raise GridDataError(f"unknown representative day `{day}`")

    def demand_at(self, day: str, node: str, t: int) -> float:
        series = self.demand.get(day, {}).get(node)
        return series[t] if series is not None else 0.0

    def state_demand(self, state: str, day: str) -> float:
        """Energy demanded by a state over one representative day, MWh"""
        return math.fsum(self.demand_at(day, n, t) for n in self.nodes_in_state(state) for t in range(self.hours))

    def rho(self, gen: Generator | str, day: str, t: int) -> float:
        return self._series('rho', gen, day, t)

    def sigma(self, gen: Generator | str, day: str, t: int) -> float:
        return self._series('sigma', gen, day, t)

    def upsilon(self, gen: Generator | str, day: str, t: int) -> float:
        return self._series('upsilon', gen, day, t)

    def _series(self, table_name: str, gen: Generator | str, day: str, t: int) -> float:
        if isinstance(gen, str):
            gen = self.gen(gen)
        series = getattr(self.forecast, table_name).get(day, {}).get(gen.id)
        if series is not None:
            return series[t]
        return getattr(gen, table_name)

    def incident_capacity(self, node_id: str) -> float:
        return math.fsum(l.capacity for l in self.lines if node_id in (l.from_node, l.to_node))



## Retirement
#############

class RetirementScenario(Record):
    name: str = 'basecase'
    gen_ids: list[str] = RecordField(default_factory=list)

RETIREMENT_PRESETS: dict[str, tuple[str, ...]] = {
    'basecase': (),
    'coal': ('coal',),
    'coal_nuclear': ('coal', 'nuclear'),
}

def retirement_by_fuel(grid: GridModel, name: str, fuels: tuple[str, ...] | list[str]) -> RetirementScenario:
    """Scenario removing every existing generator whose fuel tag is listed"""
    wanted = {f.lower() for f in fuels}
    return RetirementScenario(name=name, gen_ids=[g.id for g in grid.existing_gens if g.fuel.lower() in wanted])

def preset_retirement(grid: GridModel, name: str) -> RetirementScenario:
    if name not in RETIREMENT_PRESETS:
        raise GridDataError(f"unknown retirement scenario `{name}`, expected one of {sorted(RETIREMENT_PRESETS)}")
    return retirement_by_fuel(grid, name, RETIREMENT_PRESETS[name])

def apply_retirement(grid: GridModel, scenario: RetirementScenario) -> GridModel:
    """Remove the scenario's generators; ids retired earlier are accepted so reapplying is a no-op"""
    present = {g.id for g in grid.all_gens}
    for gen_id in scenario.gen_ids:
        if gen_id not in present and gen_id not in grid.retired:
            raise GridDataError(f"retirement scenario `{scenario.name}` references unknown generator `{gen_id}`")

    removed = set(scenario.gen_ids)
    if not removed - set(grid.retired):
        return grid

    forecast = grid.forecast.evolve(**{
        table_name: {
            day: {gen: series for gen, series in by_gen.items() if gen not in removed}
            for day, by_gen in getattr(grid.forecast, table_name).items()
        }
        for table_name in ('rho', 'sigma', 'upsilon')
    })
    logger.info("Scenario %s retires %d generators", scenario.name, len(removed - set(grid.retired)))
    return grid.evolve(
        existing_gens=[g for g in grid.existing_gens if g.id not in removed],
        candidate_gens=[g for g in grid.candidate_gens if g.id not in removed],
        forecast=forecast,
        retired=sorted(set(grid.retired) | removed),
    )



## Horizon
##########

def select_horizon(grid: GridModel, hours: int | None = None, days: list[str] | None = None) -> GridModel:
    """Keep the first `hours` hours and the listed days, renormalizing day probabilities"""
    hours = grid.hours if hours is None else hours
    if not 1 <= hours <= grid.hours:
        raise GridDataError(f"horizon of {hours} hours outside 1..{grid.hours}")
    days = grid.day_ids if days is None else list(days)
    for day in days:
        if day not in grid.day_ids:
            raise GridDataError(f"unknown representative day `{day}`")
    kept = [d for d in grid.rep_days if d.id in days]
    total = math.fsum(d.probability for d in kept)
    if total <= 0:
        raise GridDataError("selected representative days carry zero probability")

    def cut(table: dict[str, dict[str, list[float]]]) -> dict[str, dict[str, list[float]]]:
        return {day: {key: series[:hours] for key, series in by_key.items()} for day, by_key in table.items() if day in days}

    return grid.evolve(
        hours=hours,
        rep_days=[d.evolve(probability=d.probability / total) for d in kept],
        demand=cut(grid.demand),
        forecast=grid.forecast.evolve(rho=cut(grid.forecast.rho), sigma=cut(grid.forecast.sigma), upsilon=cut(grid.forecast.upsilon)),
    )



## Economics & policies
#######################

def prorate_capital_cost(cost: float, years: int, rate: float) -> float:
    """Daily capital-recovery annuity of an overnight cost, $/MW·day"""
    if years < 1:
        raise PolicyError(f"recovery period must be at least 1 year, got {years}")
    if rate < 0:
        raise PolicyError(f"discount rate must be non-negative, got {rate}")
    if rate == 0:
        return cost / years / 365.0
    return cost * rate / (1.0 - (1.0 + rate) ** -years) / 365.0

class Economics(Record):
    recovery_years: int = RecordField(default=10, ge=1)
    discount_rate: float = RecordField(default=0.05, ge=0)

    def daily(self, cost: float) -> float:
        return prorate_capital_cost(cost, self.recovery_years, self.discount_rate)

class ActorPolicy(Record):
    """Regulator settings of one state

    Budgets are on the same daily basis as the pro-rated costs they bound; None means unlimited.
    capacity_tariff is in $/kW and pro-rated like capital. import_limit applies to every node of the
    state unless node_import_limits overrides it; None falls back to the node's incident line capacity.
    """
    state: str = RecordField(pattern=ID_PATTERN)
    rps: float = RecordField(default=0.0, ge=0, le=1)
    capital_budget: float | None = RecordField(default=None, ge=0)
    policy_budget: float | None = RecordField(default=None, ge=0)
    feed_in_tariff: float = RecordField(default=0.0, ge=0)
    capacity_tariff: float = RecordField(default=0.0, ge=0)
    retail_tariff: float = RecordField(default=0.0, ge=0)
    retail_profile: dict[str, list[float]] = RecordField(default_factory=dict)
    import_limit: float | None = RecordField(default=None, ge=0)
    node_import_limits: dict[str, float] = RecordField(default_factory=dict)
    security: float = RecordField(default=0.03, gt=0, lt=0.5)

    def retail_price(self, node: str, t: int) -> float:
        profile = self.retail_profile.get(node)
        return profile[t] if profile is not None else self.retail_tariff

    def node_import_limit(self, grid: GridModel, node: str) -> float:
        limit = self.node_import_limits.get(node, self.import_limit)
        physical = grid.incident_capacity(node)
        return physical if limit is None else min(limit, physical)

class PolicySet(Record):
    economics: Economics = RecordField(default_factory=Economics)
    states: dict[str, ActorPolicy] = RecordField(default_factory=dict)

    def __post_init__(self):
        for key, policy in self.states.items():
            if key != policy.state:
                raise PolicyError(f"policy stored under `{key}` names state `{policy.state}`")

    def policy(self, state: str) -> ActorPolicy:
        """The state's policy, or a neutral default for states without one"""
        if state in self.states:
            return self.states[state]
        return ActorPolicy(state=state)

    def check_grid(self, grid: GridModel) -> None:
        for state, policy in self.states.items():
            if state not in grid.states:
                raise PolicyError(f"policy for unknown state `{state}`")
            own = set(grid.nodes_in_state(state))
            for node in [*policy.node_import_limits, *policy.retail_profile]:
                if node not in own:
                    raise PolicyError(f"policy of `{state}` references node `{node}` outside the state")
            for node, profile in policy.retail_profile.items():
                if len(profile) < grid.hours:
                    raise PolicyError(f"retail profile of `{node}` has {len(profile)} values, expected {grid.hours}")

    def capital_cost(self, gen: Generator) -> float:
        """Daily pro-rated capital cost of a candidate, $/MW·day"""
        if not isinstance(gen, CandidateGenerator):
            return 0.0
        return self.economics.daily(gen.capital_cost)

    def capacity_tariff(self, state: str) -> float:
        """Daily pro-rated capacity tariff, $/MW·day"""
        return self.economics.daily(self.policy(state).capacity_tariff * 1000.0)



## Loading & saving
###################

_CSV_FILES = ('nodes.csv', 'lines.csv', 'generators.csv', 'candidates.csv', 'demand.csv', 'repdays.csv', 'forecast.csv')

def resolve_data_path(path: str | Path, filename: str | None = None) -> Path:
    """Map the bundled case name `iso-ne` to its directory, other values to plain paths"""
    if str(path).lower() in ('iso-ne', 'iso_ne', 'isone'):
        base = BUNDLED_DATA / 'iso_ne'
        return base / filename if filename else base
    return Path(path)

def load_grid(path: str | Path) -> GridModel:
    """Load and validate a grid from a JSON document or a directory of CSV files"""
    path = resolve_data_path(path)
    if not path.exists():
        raise GridDataError(f"grid path `{path}` does not exist")
    if path.is_dir():
        data = _read_grid_csv(path)
    else:
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise GridDataError(f"`{path}` is not valid JSON: {e}")
    grid = GridModel(**data)
    logger.info(
        "Loaded grid %s: %d nodes, %d lines, %d existing and %d candidate generators, %d days x %d hours",
        grid.name, len(grid.nodes), len(grid.lines), len(grid.existing_gens), len(grid.candidate_gens),
        len(grid.rep_days), grid.hours,
    )
    return grid

def save_grid(grid: GridModel, path: str | Path) -> None:
    """Write a grid as one JSON document (path ending in .json) or as a CSV directory"""
    path = Path(path)
    if path.suffix.lower() == '.json':
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(grid.serialize(), indent=2, sort_keys=True))
        return
    _write_grid_csv(grid, path)

def _rows(frame: pd.DataFrame) -> list[dict[str, Any]]:
    """Records of a frame with blank cells dropped so field defaults apply"""
    rows = []
    for row in frame.to_dict(orient='records'):
        rows.append({key: val for key, val in row.items() if not (isinstance(val, float) and math.isnan(val)) and val != ''})
    return rows

def _read_csv(path: Path, str_columns: tuple[str, ...]) -> pd.DataFrame:
    try:
        return pd.read_csv(path, dtype={c: str for c in str_columns}, keep_default_na=True, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise GridDataError(f"could not parse `{path}`: {e}")

def _series_table(frame: pd.DataFrame, key: str, value: str, hours: int, source: Path) -> dict[str, dict[str, list[float]]]:
    table: dict[str, dict[str, list[float]]] = {}
    if value not in frame.columns:
        return table
    frame = frame.dropna(subset=[value])
    for (day, item), group in frame.groupby(['day', key], sort=False):
        group = group.sort_values('hour')
        hours_seen = group['hour'].astype(int).tolist()
        if hours_seen != list(range(hours)):
            raise GridDataError(f"`{source}`: `{item}` on `{day}` must list hours 0..{hours - 1} exactly once")
        table.setdefault(str(day), {})[str(item)] = [float(v) for v in group[value]]
    return table

def _read_grid_csv(path: Path) -> dict[str, Any]:
    for required in ('nodes.csv', 'generators.csv', 'demand.csv', 'repdays.csv'):
        if not (path / required).exists():
            raise GridDataError(f"grid directory `{path}` is missing `{required}`")

    ids = ('id', 'state', 'node', 'from_node', 'to_node', 'kind', 'fuel', 'day', 'gen')
    demand = _read_csv(path / 'demand.csv', ids)
    missing = {'day', 'node', 'hour', 'demand'} - set(demand.columns)
    if missing:
        raise GridDataError(f"`demand.csv` lacks columns {sorted(missing)}")
    hours = int(demand['hour'].max()) + 1

    data: dict[str, Any] = {
        'name': path.name,
        'hours': hours,
        'nodes': _rows(_read_csv(path / 'nodes.csv', ids)),
        'existing_gens': _rows(_read_csv(path / 'generators.csv', ids)),
        'rep_days': _rows(_read_csv(path / 'repdays.csv', ids)),
        'demand': _series_table(demand, 'node', 'demand', hours, path / 'demand.csv'),
    }
    if (path / 'lines.csv').exists():
        data['lines'] = _rows(_read_csv(path / 'lines.csv', ids))
    if (path / 'candidates.csv').exists():
        data['candidate_gens'] = _rows(_read_csv(path / 'candidates.csv', ids))
    if (path / 'forecast.csv').exists():
        forecast = _read_csv(path / 'forecast.csv', ids)
        data['forecast'] = {
            column: _series_table(forecast, 'gen', column, hours, path / 'forecast.csv')
            for column in ('rho', 'sigma', 'upsilon')
        }
    return data

def _write_grid_csv(grid: GridModel, path: Path) -> None:
    path.mkdir(parents=True, exist_ok=True)

    def records(items: list[Record], columns: list[str]) -> pd.DataFrame:
        return pd.DataFrame([{c: getattr(item, c) for c in columns} for item in items], columns=columns)

    gen_columns = Generator.record_fields()
    records(grid.nodes, Node.record_fields()).to_csv(path / 'nodes.csv', index=False)
    records(grid.lines, Line.record_fields()).to_csv(path / 'lines.csv', index=False)
    records(grid.existing_gens, gen_columns).to_csv(path / 'generators.csv', index=False)
    records(grid.candidate_gens, CandidateGenerator.record_fields()).to_csv(path / 'candidates.csv', index=False)
    pd.DataFrame([{'id': d.id, 'probability': d.probability} for d in grid.rep_days]).to_csv(path / 'repdays.csv', index=False)

    demand_rows = [
        {'day': day, 'node': node, 'hour': t, 'demand': value}
        for day, by_node in grid.demand.items() for node, series in by_node.items() for t, value in enumerate(series)
    ]
    pd.DataFrame(demand_rows, columns=['day', 'node', 'hour', 'demand']).to_csv(path / 'demand.csv', index=False)

    forecast_rows: dict[tuple[str, str, int], dict[str, Any]] = {}
    for column in ('rho', 'sigma', 'upsilon'):
        for day, by_gen in getattr(grid.forecast, column).items():
            for gen, series in by_gen.items():
                for t, value in enumerate(series):
                    forecast_rows.setdefault((day, gen, t), {'day': day, 'gen': gen, 'hour': t})[column] = value
    if forecast_rows:
        pd.DataFrame(list(forecast_rows.values()), columns=['day', 'gen', 'hour', 'rho', 'sigma', 'upsilon']).to_csv(path / 'forecast.csv', index=False)
    elif (path / 'forecast.csv').exists():
        (path / 'forecast.csv').unlink()

def load_policies(path: str | Path) -> PolicySet:
    """Load a policy document: an `economics` table plus one table per state (TOML or JSON)"""
    path = resolve_data_path(path, 'policies.toml')
    if not path.exists():
        raise PolicyError(f"policy file `{path}` does not exist")
    try:
        if path.suffix.lower() == '.toml':
            with open(path, 'rb') as f:
                raw = tomllib.load(f)
        else:
            raw = json.loads(path.read_text())
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise PolicyError(f"could not parse `{path}`: {e}")

    raw = dict(raw)
    economics = raw.pop('economics', {})
    tables = raw.pop('states', raw)
    states = {}
    for state, table in tables.items():
        if not isinstance(table, dict):
            raise PolicyError(f"policy entry `{state}` must be a table")
        states[state] = {'state': state, **table}
    return PolicySet(economics=economics, states=states)
