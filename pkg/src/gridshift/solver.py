"""Built-in backend: HiGHS dual simplex relaxations inside a branch-and-bound search

Second-order cones are handled by outer approximation. Each node solves its LP relaxation,
adds supporting hyperplanes at violated cones and re-solves until the cones hold within
`cone_tol`; binaries and SOS1 sets are then branched on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import heapq
import itertools
import logging
import math
import time

import highspy
import numpy as np
import scipy.optimize
import scipy.sparse as sp

from .conic_program import ConicProgram, SolveResult, SolveStats, SocConstraint
from .errors import SolverError
from .records import Record, RecordField

logger = logging.getLogger(__name__)



class SolverOptions(Record):
    gap: float = RecordField(default=1e-4, ge=0)
    node_limit: int | None = RecordField(default=None, gt=0)
    time_limit: float | None = RecordField(default=None, gt=0)
    feasibility_tol: float = RecordField(default=1e-7, gt=0)
    integrality_tol: float = RecordField(default=1e-6, gt=0, lt=0.5)
    cut_rounds: int = RecordField(default=100, ge=1)
    cone_tol: float = RecordField(default=1e-6, gt=0)
    heuristic_frequency: int = RecordField(default=10, ge=0)



## Compilation
##############

@dataclass
class _LpCore:
    """Min-form matrices of a program's linear part"""
    c: np.ndarray
    obj_sign: float
    obj_constant: float
    a_ub: sp.csr_matrix | None
    b_ub: np.ndarray
    ub_rows: list[tuple[str, float]]
    a_eq: sp.csr_matrix | None
    b_eq: np.ndarray
    eq_rows: list[str]
    lb: np.ndarray
    ub: np.ndarray
    cut_rows: list[np.ndarray] = field(default_factory=list)
    cut_rhs: list[float] = field(default_factory=list)

def _sparse(rows: list[dict[int, float]], n: int) -> sp.csr_matrix | None:
    if not rows:
        return None
    data, row_idx, col_idx = [], [], []
    for r, terms in enumerate(rows):
        for i, c in terms.items():
            row_idx.append(r)
            col_idx.append(i)
            data.append(c)
    return sp.csr_matrix((data, (row_idx, col_idx)), shape=(len(rows), n))

def compile_program(program: ConicProgram) -> _LpCore:
    program.validate()
    n = len(program.variables)
    obj_sign = -1.0 if program.sense == 'max' else 1.0
    c = np.zeros(n)
    for i, coef in program.objective.terms.items():
        c[i] = obj_sign * coef

    ub_terms, b_ub, ub_rows = [], [], []
    eq_terms, b_eq, eq_rows = [], [], []
    for row in program.constraints:
        if row.sense == '==':
            eq_terms.append(row.terms)
            b_eq.append(row.rhs)
            eq_rows.append(row.name)
        elif row.sense == '<=':
            ub_terms.append(row.terms)
            b_ub.append(row.rhs)
            ub_rows.append((row.name, 1.0))
        else:
            ub_terms.append({i: -coef for i, coef in row.terms.items()})
            b_ub.append(-row.rhs)
            ub_rows.append((row.name, -1.0))

    return _LpCore(
        c=c,
        obj_sign=obj_sign,
        obj_constant=program.objective.constant,
        a_ub=_sparse(ub_terms, n),
        b_ub=np.array(b_ub, dtype=float),
        ub_rows=ub_rows,
        a_eq=_sparse(eq_terms, n),
        b_eq=np.array(b_eq, dtype=float),
        eq_rows=eq_rows,
        lb=np.array([v.lb for v in program.variables], dtype=float),
        ub=np.array([v.ub for v in program.variables], dtype=float),
    )

@dataclass
class _LpOutcome:
    status: str
    fun: float | None = None
    x: np.ndarray | None = None
    ineq_marginals: np.ndarray | None = None
    eq_marginals: np.ndarray | None = None
    basis: tuple[list, list] | None = None

def _solve_core(core: _LpCore, lb: np.ndarray, ub: np.ndarray, tol: float) -> _LpOutcome:
    a_ub, b_ub = core.a_ub, core.b_ub
    if core.cut_rows:
        cuts = sp.csr_matrix(np.vstack(core.cut_rows))
        a_ub = cuts if a_ub is None else sp.vstack([a_ub, cuts], format='csr')
        b_ub = np.concatenate([b_ub, np.array(core.cut_rhs)])
    if np.any(lb > ub + tol):
        return _LpOutcome('infeasible')

    res = scipy.optimize.linprog(
        core.c,
        A_ub=a_ub, b_ub=b_ub if a_ub is not None else None,
        A_eq=core.a_eq, b_eq=core.b_eq if core.a_eq is not None else None,
        bounds=np.column_stack([lb, ub]),
        method='highs-ds',
        options={'primal_feasibility_tolerance': tol, 'dual_feasibility_tolerance': tol},
    )
    if res.status == 0:
        ineq = getattr(getattr(res, 'ineqlin', None), 'marginals', None)
        eq = getattr(getattr(res, 'eqlin', None), 'marginals', None)
        return _LpOutcome('optimal', float(res.fun), np.asarray(res.x, dtype=float), ineq, eq)
    if res.status == 1:
        return _LpOutcome('iteration_limit')
    if res.status == 2:
        return _LpOutcome('infeasible')
    if res.status == 3:
        return _LpOutcome('unbounded')
    raise SolverError(f"LP relaxation failed: {res.message}")



## LP
#####

def solve_lp(program: ConicProgram, options: SolverOptions | None = None) -> SolveResult:
    """Solve a continuous linear program, returning primal values and row duals"""
    options = options or SolverOptions()
    if not program.is_linear:
        raise SolverError(f"{program.name}: solve_lp needs a continuous program without cones or SOS1 sets")
    start = time.perf_counter()
    core = compile_program(program)
    outcome = _solve_core(core, core.lb, core.ub, options.feasibility_tol)
    stats = SolveStats(nodes=0, cuts=0, lp_solves=1, wall_time=time.perf_counter() - start)
    if outcome.status != 'optimal':
        logger.info("%s: LP %s", program.name, outcome.status)
        return SolveResult(status=outcome.status, stats=stats)

    # d(objective)/d(rhs) = sign_obj * sign_row * marginal
    duals: dict[str, float] = {}
    if outcome.ineq_marginals is not None:
        for (name, row_sign), marginal in zip(core.ub_rows, outcome.ineq_marginals):
            duals[name] = core.obj_sign * row_sign * float(marginal) + 0.0
    if outcome.eq_marginals is not None:
        for name, marginal in zip(core.eq_rows, outcome.eq_marginals):
            duals[name] = core.obj_sign * float(marginal) + 0.0

    objective = core.obj_sign * outcome.fun + core.obj_constant
    return SolveResult(
        status='optimal',
        objective=objective,
        values={v.name: float(outcome.x[v.index]) for v in program.variables},
        x=outcome.x,
        best_bound=objective,
        duals=duals,
        stats=stats,
    )



## Cones
########

def soc_violation_cut(head: float, tail: list[float] | np.ndarray, tol: float = 1e-6) -> np.ndarray | None:
    """Weights w of the cut y >= w.x supporting the cone at the point's tail, or None if the point is inside

    A zero tail with a negative head yields all-zero weights, i.e. the cut y >= 0.
    """
    tail = np.asarray(tail, dtype=float)
    norm = float(np.linalg.norm(tail)) if tail.size else 0.0
    if head >= norm - tol:
        return None
    if norm <= tol:
        return np.zeros_like(tail)
    return tail / norm

def _cut_row(cone: SocConstraint, weights: np.ndarray, n: int) -> tuple[np.ndarray, float]:
    """Row a, rhs b of  w.tail(x) - y <= -w.const  in min-form"""
    row = np.zeros(n)
    row[cone.head] -= 1.0
    rhs = 0.0
    for w, expr in zip(weights, cone.tail):
        for i, c in expr.terms.items():
            row[i] += w * c
        rhs -= w * expr.constant
    return row, rhs

def _separate(program: ConicProgram, core: _LpCore, x: np.ndarray, tol: float) -> int:
    added = 0
    n = len(program.variables)
    for cone in program.cones:
        values = [expr.value(x) for expr in cone.tail]
        weights = soc_violation_cut(float(x[cone.head]), values, tol)
        if weights is None:
            continue
        row, rhs = _cut_row(cone, weights, n)
        core.cut_rows.append(row)
        core.cut_rhs.append(rhs)
        added += 1
    return added



## Branch and bound
###################

class _HighsRelaxation:
    """Persistent HiGHS model of a search's relaxations

    Nodes differ from the root only in column bounds, so each solve changes the bounds that moved
    and restarts the dual simplex from the parent's basis. Cone cuts are appended as rows.
    """

    def __init__(self, core: _LpCore, tol: float):
        self.core = core
        self.highs = highspy.Highs()
        self.highs.setOptionValue('output_flag', False)
        self.highs.setOptionValue('solver', 'simplex')
        self.highs.setOptionValue('simplex_strategy', 1)
        self.highs.setOptionValue('presolve', 'off')
        self.highs.setOptionValue('primal_feasibility_tolerance', tol)
        self.highs.setOptionValue('dual_feasibility_tolerance', tol)
        self.tol = tol

        blocks = [a for a in (core.a_ub, core.a_eq) if a is not None]
        n = core.c.size
        matrix = sp.vstack(blocks, format='csc') if blocks else sp.csc_matrix((0, n))
        lp = highspy.HighsLp()
        lp.num_col_ = n
        lp.num_row_ = matrix.shape[0]
        lp.col_cost_ = core.c.tolist()
        lp.col_lower_ = core.lb.tolist()
        lp.col_upper_ = core.ub.tolist()
        lp.row_lower_ = [-highspy.kHighsInf] * core.b_ub.size + core.b_eq.tolist()
        lp.row_upper_ = core.b_ub.tolist() + core.b_eq.tolist()
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = matrix.indptr.tolist()
        lp.a_matrix_.index_ = matrix.indices.tolist()
        lp.a_matrix_.value_ = matrix.data.tolist()
        if self.highs.passModel(lp) == highspy.HighsStatus.kError:
            raise SolverError("HiGHS rejected the relaxation model")
        self.lb = core.lb.copy()
        self.ub = core.ub.copy()
        self.cuts = 0

    def sync_cuts(self) -> None:
        for row, rhs in zip(self.core.cut_rows[self.cuts:], self.core.cut_rhs[self.cuts:]):
            idx = np.flatnonzero(row)
            self.highs.addRow(-highspy.kHighsInf, float(rhs), int(idx.size), idx.astype(np.int32), row[idx].astype(float))
        self.cuts = len(self.core.cut_rows)

    def set_bounds(self, lb: np.ndarray, ub: np.ndarray) -> None:
        moved = np.flatnonzero((lb != self.lb) | (ub != self.ub))
        if moved.size:
            self.highs.changeColsBounds(int(moved.size), moved.astype(np.int32), lb[moved].astype(float), ub[moved].astype(float))
            self.lb[moved] = lb[moved]
            self.ub[moved] = ub[moved]

    def restore(self, basis: tuple[list, list]) -> None:
        col_status, row_status = basis
        warm = highspy.HighsBasis()
        warm.valid = True
        warm.col_status = list(col_status)
        # Rows cut since the basis was taken enter as basic slacks
        missing = self.highs.getNumRow() - len(row_status)
        warm.row_status = list(row_status) + [highspy.HighsBasisStatus.kBasic] * max(missing, 0)
        self.highs.setBasis(warm)

    def solve(self, lb: np.ndarray, ub: np.ndarray, basis: tuple[list, list] | None = None) -> _LpOutcome:
        if np.any(lb > ub + self.tol):
            return _LpOutcome('infeasible')
        self.sync_cuts()
        self.set_bounds(lb, ub)
        if basis is not None:
            self.restore(basis)
        self.highs.run()
        status = self.highs.getModelStatus()
        if status == highspy.HighsModelStatus.kOptimal:
            x = np.asarray(self.highs.getSolution().col_value, dtype=float)
            current = self.highs.getBasis()
            return _LpOutcome(
                'optimal', float(self.highs.getInfo().objective_function_value), x,
                basis=(list(current.col_status), list(current.row_status)),
            )
        if status == highspy.HighsModelStatus.kInfeasible:
            return _LpOutcome('infeasible')
        if status == highspy.HighsModelStatus.kUnbounded:
            return _LpOutcome('unbounded')
        if status in (highspy.HighsModelStatus.kIterationLimit, highspy.HighsModelStatus.kTimeLimit):
            return _LpOutcome('iteration_limit')
        logger.debug("HiGHS returned %s, re-solving from scratch", status)
        return _solve_core(self.core, lb, ub, self.tol)


@dataclass
class _Node:
    lb: np.ndarray
    ub: np.ndarray
    bound: float
    depth: int
    basis: tuple[list, list] | None = None

class _Search:
    def __init__(self, program: ConicProgram, options: SolverOptions):
        self.program = program
        self.options = options
        self.core = compile_program(program)
        self.lp = _HighsRelaxation(self.core, options.feasibility_tol)
        self.stats = SolveStats()
        self.incumbent: float | None = None
        self.incumbent_x: np.ndarray | None = None
        self.unresolved: list[float] = []
        self.start = time.perf_counter()
        self.binary_idx = np.array([v.index for v in program.binaries], dtype=int)

    def relax(self, lb: np.ndarray, ub: np.ndarray, basis: tuple[list, list] | None = None) -> _LpOutcome:
        """LP relaxation tightened by cone cuts

        Returns status `cut_limit` when the cones still fail after `cut_rounds` rounds; its
        objective is a valid bound but its point is not feasible.
        """
        outcome = _LpOutcome('infeasible')
        for _ in range(self.options.cut_rounds):
            outcome = self.lp.solve(lb, ub, basis)
            basis = None
            self.stats.lp_solves += 1
            if outcome.status != 'optimal' or not self.program.cones:
                return outcome
            added = _separate(self.program, self.core, outcome.x, self.options.cone_tol)
            self.stats.cuts += added
            if added == 0:
                return outcome
            logger.debug("%s: %d cone cuts added", self.program.name, added)
        logger.warning("%s: cone cuts did not converge within %d rounds", self.program.name, self.options.cut_rounds)
        return _LpOutcome('cut_limit', outcome.fun, outcome.x, basis=outcome.basis)

    def fractional_binary(self, x: np.ndarray) -> int | None:
        if not self.binary_idx.size:
            return None
        values = x[self.binary_idx]
        frac = np.abs(values - np.round(values))
        best = int(np.argmax(frac))
        if frac[best] <= self.options.integrality_tol:
            return None
        # Most fractional first
        dist = np.abs(values - 0.5)
        return int(self.binary_idx[int(np.argmin(np.where(frac > self.options.integrality_tol, dist, np.inf)))])

    def violated_sos(self, x: np.ndarray) -> tuple[list[int], int] | None:
        """Most violated SOS1 set, scored by its mass outside the largest member"""
        tol = self.options.integrality_tol
        best, best_score = None, tol
        for sos in self.program.sos1:
            magnitudes = np.abs(x[sos.members])
            score = float(magnitudes.sum() - magnitudes.max())
            if score > best_score:
                best, best_score = sos, score
        if best is None:
            return None
        largest = max(best.members, key=lambda i: abs(x[i]))
        return best.members, largest

    def offer(self, fun: float, x: np.ndarray) -> None:
        if self.incumbent is None or fun < self.incumbent - 1e-12:
            self.incumbent = fun
            self.incumbent_x = x.copy()
            logger.info("%s: incumbent %.8g after %d nodes", self.program.name, self.objective(fun), self.stats.nodes)

    def objective(self, fun: float) -> float:
        return self.core.obj_sign * fun + self.core.obj_constant

    def round_heuristic(self, x: np.ndarray, lb: np.ndarray, ub: np.ndarray) -> None:
        lb, ub = lb.copy(), ub.copy()
        if self.binary_idx.size:
            rounded = np.clip(np.round(x[self.binary_idx]), lb[self.binary_idx], ub[self.binary_idx])
            lb[self.binary_idx] = rounded
            ub[self.binary_idx] = rounded
        for sos in self.program.sos1:
            keep = max(sos.members, key=lambda i: abs(x[i]))
            for i in sos.members:
                if i != keep:
                    ub[i] = min(ub[i], 0.0)
                    lb[i] = min(lb[i], 0.0)
        outcome = self.relax(lb, ub)
        if outcome.status == 'optimal' and self.fractional_binary(outcome.x) is None and self.violated_sos(outcome.x) is None:
            self.offer(outcome.fun, outcome.x)

    def gap(self, bound: float) -> float:
        if self.incumbent is None:
            return math.inf
        return (self.incumbent - bound) / max(1.0, abs(self.incumbent))

    def out_of_budget(self) -> bool:
        if self.options.node_limit is not None and self.stats.nodes >= self.options.node_limit:
            return True
        if self.options.time_limit is not None and time.perf_counter() - self.start >= self.options.time_limit:
            return True
        return False

    def children(self, node: _Node, outcome: _LpOutcome) -> list[_Node] | None:
        x, bound, basis = outcome.x, outcome.fun, outcome.basis
        branch = self.fractional_binary(x)
        if branch is not None:
            down_ub = node.ub.copy()
            down_ub[branch] = 0.0
            up_lb = node.lb.copy()
            up_lb[branch] = 1.0
            return [
                _Node(node.lb, down_ub, bound, node.depth + 1, basis),
                _Node(up_lb, node.ub, bound, node.depth + 1, basis),
            ]
        violated = self.violated_sos(x)
        if violated is not None:
            members, largest = violated
            # Either the largest member is zero, or every other member is
            zero_largest = node.ub.copy()
            zero_largest[largest] = 0.0
            zero_others = node.ub.copy()
            for i in members:
                if i != largest:
                    zero_others[i] = 0.0
            return [
                _Node(node.lb, zero_largest, bound, node.depth + 1, basis),
                _Node(node.lb, zero_others, bound, node.depth + 1, basis),
            ]
        return None

    def run(self) -> SolveResult:
        counter = itertools.count()
        stack: list[_Node] = [_Node(self.core.lb.copy(), self.core.ub.copy(), -math.inf, 0)]
        heap: list[tuple[float, int, _Node]] = []
        limited = False

        while stack or heap:
            if self.out_of_budget():
                limited = True
                break
            if self.incumbent is not None and stack:
                # Depth-first until the first incumbent, best-first afterwards
                for node in stack:
                    heapq.heappush(heap, (node.bound, next(counter), node))
                stack.clear()
            node = stack.pop() if stack else heapq.heappop(heap)[2]

            if self.incumbent is not None and self.gap(node.bound) <= self.options.gap:
                continue

            self.stats.nodes += 1
            outcome = self.relax(node.lb, node.ub, node.basis)
            if outcome.status == 'unbounded':
                if node.depth == 0:
                    return self.result('unbounded')
                raise SolverError(f"{self.program.name}: unbounded relaxation below the root")
            if outcome.status not in ('optimal', 'cut_limit'):
                continue
            if self.incumbent is not None and self.gap(outcome.fun) <= self.options.gap:
                continue

            kids = self.children(node, outcome)
            if kids is None:
                if outcome.status == 'optimal':
                    self.offer(outcome.fun, outcome.x)
                else:
                    # Integral but outside the cones: keep only its bound
                    self.unresolved.append(outcome.fun)
                continue
            freq = self.options.heuristic_frequency
            if freq and (self.stats.nodes == 1 or self.stats.nodes % freq == 0):
                self.round_heuristic(outcome.x, node.lb, node.ub)
            if self.incumbent is None:
                stack.extend(kids)
            else:
                for kid in kids:
                    heapq.heappush(heap, (kid.bound, next(counter), kid))

            if self.stats.nodes % 100 == 0:
                logger.info(
                    "%s: %d nodes, %d open, incumbent %s, gap %.3g",
                    self.program.name, self.stats.nodes, len(stack) + len(heap),
                    None if self.incumbent is None else f"{self.objective(self.incumbent):.8g}", self.gap(self.open_bound(stack, heap)),
                )

        bound = self.open_bound(stack, heap) if limited else min([self.incumbent, *self.unresolved], default=None)
        if self.incumbent is None:
            return self.result('iteration_limit' if limited or self.unresolved else 'infeasible')
        if (limited or self.unresolved) and self.gap(bound) > self.options.gap:
            return self.result('gap_limit', bound)
        return self.result('optimal', bound)

    def open_bound(self, stack: list[_Node], heap: list[tuple[float, int, _Node]]) -> float:
        bounds = [n.bound for n in stack] + [item[0] for item in heap] + self.unresolved
        if self.incumbent is not None:
            bounds.append(self.incumbent)
        return min(bounds) if bounds else math.inf

    def result(self, status: str, bound: float | None = None) -> SolveResult:
        self.stats.wall_time = time.perf_counter() - self.start
        logger.info(
            "%s: %s after %d nodes, %d cuts, %d LP solves, %.2fs",
            self.program.name, status, self.stats.nodes, self.stats.cuts, self.stats.lp_solves, self.stats.wall_time,
        )
        if self.incumbent_x is None:
            return SolveResult(status=status, stats=self.stats)
        x = self.incumbent_x
        if self.binary_idx.size:
            x = x.copy()
            x[self.binary_idx] = np.round(x[self.binary_idx])
        best_bound = None if bound is None or not math.isfinite(bound) else self.objective(bound)
        return SolveResult(
            status=status,
            objective=self.objective(self.incumbent),
            values={v.name: float(x[v.index]) for v in self.program.variables},
            x=x,
            best_bound=best_bound,
            stats=self.stats,
        )

def branch_and_bound(program: ConicProgram, options: SolverOptions | None = None) -> SolveResult:
    """Solve a mixed-integer conic program to the relative gap in options"""
    options = options or SolverOptions()
    logger.info("%s: branch and bound on %r", program.name, program)
    return _Search(program, options).run()



## Dispatch
###########

def solve(program: ConicProgram, options: SolverOptions | None = None, backend: str = 'builtin') -> SolveResult:
    """Solve with the chosen backend; continuous LPs skip the search and keep their duals"""
    if backend == 'external':
        from .lp_format import ExternalSolver
        return ExternalSolver().solve(program)
    if backend != 'builtin':
        raise SolverError(f"unknown backend `{backend}`, expected `builtin` or `external`")
    if program.is_linear:
        return solve_lp(program, options)
    return branch_and_bound(program, options)
