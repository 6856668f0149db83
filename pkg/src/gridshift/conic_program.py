"""Solver-agnostic mixed-integer conic program

Variables, sparse linear rows, second-order cone memberships [y; x] with y a variable and x a
list of affine expressions, SOS1 sets and a linear objective. Builders in market, mpec and
benchmark write into a ConicProgram; solver and lp_format read it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Literal
import math

import numpy as np

from .errors import ProgramError



## Expressions
##############

class Variable:
    """A decision variable owned by one ConicProgram; compares by identity"""
    __slots__ = ('index', 'name', 'lb', 'ub', 'kind')

    def __init__(self, index: int, name: str, lb: float, ub: float, kind: str):
        self.index = index
        self.name = name
        self.lb = lb
        self.ub = ub
        self.kind = kind

    def __repr__(self) -> str:
        return f"Variable({self.name!r}, lb={self.lb}, ub={self.ub}, kind={self.kind!r})"

    def expr(self) -> LinExpr:
        return LinExpr({self.index: 1.0})

    def __add__(self, other): return self.expr() + other
    def __radd__(self, other): return self.expr() + other
    def __sub__(self, other): return self.expr() - other
    def __rsub__(self, other): return other - self.expr()
    def __mul__(self, other): return self.expr() * other
    def __rmul__(self, other): return self.expr() * other
    def __truediv__(self, other): return self.expr() / other
    def __neg__(self): return -self.expr()


class LinExpr:
    """Sparse affine expression sum(coef * x[index]) + constant"""
    __slots__ = ('terms', 'constant')

    def __init__(self, terms: dict[int, float] | None = None, constant: float = 0.0):
        self.terms = dict(terms) if terms else {}
        self.constant = float(constant)

    def __repr__(self) -> str:
        inner = " + ".join(f"{c:g}*x{i}" for i, c in self.terms.items())
        return f"LinExpr({inner or '0'} + {self.constant:g})"

    def copy(self) -> LinExpr:
        return LinExpr(self.terms, self.constant)

    def _iadd(self, other, scale: float = 1.0) -> LinExpr:
        if isinstance(other, Variable):
            self.terms[other.index] = self.terms.get(other.index, 0.0) + scale
        elif isinstance(other, LinExpr):
            for i, c in other.terms.items():
                self.terms[i] = self.terms.get(i, 0.0) + scale * c
            self.constant += scale * other.constant
        elif isinstance(other, (int, float, np.floating, np.integer)):
            self.constant += scale * float(other)
        else:
            return NotImplemented
        return self

    def __add__(self, other):
        return self.copy()._iadd(other)

    def __radd__(self, other):
        return self.copy()._iadd(other)

    def __sub__(self, other):
        return self.copy()._iadd(other, -1.0)

    def __rsub__(self, other):
        return (-self)._iadd(other)

    def __mul__(self, other):
        if not isinstance(other, (int, float, np.floating, np.integer)):
            return NotImplemented
        scale = float(other)
        return LinExpr({i: c * scale for i, c in self.terms.items()}, self.constant * scale)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1.0 / float(other))

    def __neg__(self):
        return self * -1.0

    def value(self, x: np.ndarray | list[float]) -> float:
        return math.fsum([c * float(x[i]) for i, c in self.terms.items()]) + self.constant

    def is_constant(self) -> bool:
        return not any(self.terms.values())

    @staticmethod
    def sum(items: Iterable[Variable | LinExpr | float]) -> LinExpr:
        total = LinExpr()
        for item in items:
            total._iadd(item)
        return total

def as_expr(item: Variable | LinExpr | float) -> LinExpr:
    if isinstance(item, Variable):
        return item.expr()
    if isinstance(item, LinExpr):
        return item
    return LinExpr(constant=float(item))



## Program parts
################

Sense = Literal['<=', '>=', '==']

@dataclass
class LinearConstraint:
    name: str
    terms: dict[int, float]
    sense: str
    rhs: float

    def activity(self, x: np.ndarray) -> float:
        return math.fsum([c * float(x[i]) for i, c in self.terms.items()])

    def violation(self, x: np.ndarray) -> float:
        lhs = self.activity(x)
        if self.sense == '<=':
            return max(0.0, lhs - self.rhs)
        if self.sense == '>=':
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)

@dataclass
class SocConstraint:
    """[head; tail] in the second-order cone: x[head] >= ||tail(x)||"""
    name: str
    head: int
    tail: list[LinExpr]

    def violation(self, x: np.ndarray) -> float:
        norm = math.hypot(*[t.value(x) for t in self.tail]) if self.tail else 0.0
        return max(0.0, norm - float(x[self.head]))

@dataclass
class Sos1Set:
    name: str
    members: list[int]



## Program
##########

class ConicProgram:
    def __init__(self, name: str = 'program'):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[LinearConstraint] = []
        self.cones: list[SocConstraint] = []
        self.sos1: list[Sos1Set] = []
        self.objective: LinExpr = LinExpr()
        self.sense: str = 'max'
        self._by_name: dict[str, Variable] = {}
        self._row_names: set[str] = set()

    def __repr__(self) -> str:
        return (
            f"ConicProgram({self.name!r}: {len(self.variables)} variables, {len(self.constraints)} rows, "
            f"{len(self.cones)} cones, {len(self.sos1)} SOS1 sets)"
        )

    def add_variable(self, name: str, lb: float = 0.0, ub: float = math.inf, kind: str = 'continuous') -> Variable:
        if name in self._by_name:
            raise ProgramError(f"{self.name}: duplicate variable `{name}`")
        if kind not in ('continuous', 'binary'):
            raise ProgramError(f"{self.name}: unknown variable kind `{kind}`")
        if lb > ub:
            raise ProgramError(f"{self.name}: variable `{name}` has lb {lb} > ub {ub}")
        if kind == 'binary' and (lb < 0 or ub > 1):
            raise ProgramError(f"{self.name}: binary `{name}` must have bounds inside [0, 1]")
        var = Variable(len(self.variables), name, float(lb), float(ub), kind)
        self.variables.append(var)
        self._by_name[name] = var
        return var

    def add_binary(self, name: str) -> Variable:
        return self.add_variable(name, 0.0, 1.0, 'binary')

    def var(self, name: str) -> Variable:
        try:
            return self._by_name[name]
        except KeyError:
            raise ProgramError(f"{self.name}: unknown variable `{name}`")

    def has_var(self, name: str) -> bool:
        return name in self._by_name

    def _row_name(self, name: str | None, prefix: str) -> str:
        if name is None:
            name = f"{prefix}{len(self.constraints) + len(self.cones) + len(self.sos1)}"
        if name in self._row_names:
            raise ProgramError(f"{self.name}: duplicate row `{name}`")
        self._row_names.add(name)
        return name

    def add_constraint(self, lhs: Variable | LinExpr | float, sense: str, rhs: Variable | LinExpr | float = 0.0, name: str | None = None) -> LinearConstraint:
        """Add lhs <sense> rhs; constants of both sides end up in the row's rhs"""
        if sense not in ('<=', '>=', '=='):
            raise ProgramError(f"{self.name}: unknown sense `{sense}`")
        expr = as_expr(lhs) - as_expr(rhs)
        terms = {i: c for i, c in expr.terms.items() if c != 0.0}
        row = LinearConstraint(self._row_name(name, 'c'), terms, sense, -expr.constant)
        self.constraints.append(row)
        return row

    def add_cone(self, head: Variable, tail: list[Variable | LinExpr | float], name: str | None = None) -> SocConstraint:
        if head.lb < 0:
            raise ProgramError(f"{self.name}: cone head `{head.name}` needs a non-negative lower bound")
        cone = SocConstraint(self._row_name(name, 'q'), head.index, [as_expr(t) for t in tail])
        self.cones.append(cone)
        return cone

    def add_sos1(self, members: list[Variable], name: str | None = None) -> Sos1Set:
        for member in members:
            if member.lb < 0:
                raise ProgramError(f"{self.name}: SOS1 member `{member.name}` needs a non-negative lower bound")
        sos = Sos1Set(self._row_name(name, 's'), [m.index for m in members])
        self.sos1.append(sos)
        return sos

    def set_objective(self, expr: Variable | LinExpr | float, sense: str = 'max') -> None:
        if sense not in ('max', 'min'):
            raise ProgramError(f"{self.name}: objective sense must be `max` or `min`, got `{sense}`")
        self.objective = as_expr(expr).copy()
        self.sense = sense

    @property
    def binaries(self) -> list[Variable]:
        return [v for v in self.variables if v.kind == 'binary']

    @property
    def is_linear(self) -> bool:
        """True for a continuous LP: no binaries, cones or SOS1 sets"""
        return not self.cones and not self.sos1 and not any(v.kind == 'binary' for v in self.variables)

    def validate(self) -> None:
        n = len(self.variables)

        def check(indices: Iterable[int], where: str) -> None:
            for i in indices:
                if not 0 <= i < n:
                    raise ProgramError(f"{self.name}: {where} references unknown variable index {i}")

        check(self.objective.terms, "objective")
        for row in self.constraints:
            check(row.terms, f"row `{row.name}`")
        for cone in self.cones:
            check([cone.head], f"cone `{cone.name}`")
            for t in cone.tail:
                check(t.terms, f"cone `{cone.name}`")
            if self.variables[cone.head].lb < 0:
                raise ProgramError(f"{self.name}: cone `{cone.name}` head has a negative lower bound")
        for sos in self.sos1:
            check(sos.members, f"SOS1 set `{sos.name}`")
        for var in self.variables:
            if var.kind == 'binary' and (var.lb < 0 or var.ub > 1):
                raise ProgramError(f"{self.name}: binary `{var.name}` has bounds outside [0, 1]")

    def constraint_residuals(self, x: np.ndarray) -> dict[str, float]:
        """Largest violation per family: bounds, linear rows, cones, SOS1, integrality"""
        x = np.asarray(x, dtype=float)
        lb = np.array([v.lb for v in self.variables])
        ub = np.array([v.ub for v in self.variables])
        bounds = float(np.max(np.maximum(lb - x, 0.0) + np.maximum(x - ub, 0.0), initial=0.0))
        linear = max((row.violation(x) for row in self.constraints), default=0.0)
        cones = max((cone.violation(x) for cone in self.cones), default=0.0)
        sos = 0.0
        for s in self.sos1:
            values = sorted((abs(float(x[i])) for i in s.members), reverse=True)
            if len(values) > 1:
                sos = max(sos, values[1])
        integrality = max((abs(float(x[v.index]) - round(float(x[v.index]))) for v in self.binaries), default=0.0)
        return {'bounds': bounds, 'linear': linear, 'cones': cones, 'sos1': sos, 'integrality': integrality}



## Results
##########

STATUSES = ('optimal', 'infeasible', 'unbounded', 'iteration_limit', 'gap_limit')

@dataclass
class SolveStats:
    nodes: int = 0
    cuts: int = 0
    lp_solves: int = 0
    wall_time: float = 0.0

@dataclass
class SolveResult:
    """Outcome of one solve

    values maps variable names to primal values and duals maps row names to d(objective)/d(rhs);
    duals are only filled for continuous linear programs.
    """
    status: str
    objective: float | None = None
    values: dict[str, float] = field(default_factory=dict)
    x: np.ndarray | None = None
    best_bound: float | None = None
    duals: dict[str, float] = field(default_factory=dict)
    stats: SolveStats = field(default_factory=SolveStats)

    @property
    def has_solution(self) -> bool:
        return self.x is not None

    @property
    def gap(self) -> float | None:
        if self.objective is None or self.best_bound is None:
            return None
        return abs(self.best_bound - self.objective) / max(1.0, abs(self.objective))

    def value(self, item: Variable | LinExpr | str) -> float:
        if self.x is None:
            raise ProgramError(f"no primal solution (status `{self.status}`)")
        if isinstance(item, str):
            return self.values[item]
        if isinstance(item, Variable):
            return float(self.x[item.index])
        return item.value(self.x)

    def dual(self, row: LinearConstraint | str) -> float:
        name = row if isinstance(row, str) else row.name
        try:
            return self.duals[name]
        except KeyError:
            raise ProgramError(f"no dual for row `{name}`")



## Naming
#########

def var_name(prefix: str, *keys: object) -> str:
    """Variable or row name `prefix(k1,k2,...)`, valid in the LP text format"""
    if not keys:
        return prefix
    return f"{prefix}({','.join(str(k) for k in keys)})"
