"""LP text export/import, solution files and the external-solver adapter

The LP dialect is the CPLEX-style text format (grammar in docs/lp_format.md). Cones are written
as quadratic rows `name: [ x1 ^2 + x2 ^2 - y ^2 ] <= 0`; tail entries that are not bare variables
get an auxiliary free variable `<cone>_t<k>` and a defining row `<cone>_t<k>_def`. The objective
constant, which the format has no place for, rides in a `\\ objective constant <v>` comment.
"""

from __future__ import annotations

from pathlib import Path
import logging
import math
import os
import re
import shlex
import subprocess
import tempfile

import numpy as np

from .conic_program import ConicProgram, LinExpr, SolveResult, SolveStats
from .errors import LpFormatError, SolverError

logger = logging.getLogger(__name__)

SOLVER_CMD_ENV = 'GRIDSHIFT_SOLVER_CMD'

_SECTION_WORDS = {
    'maximize': 'max', 'maximise': 'max', 'maximum': 'max', 'max': 'max',
    'minimize': 'min', 'minimise': 'min', 'minimum': 'min', 'min': 'min',
    'subject to': 'st', 'such that': 'st', 'st': 'st', 's.t.': 'st',
    'bounds': 'bounds', 'bound': 'bounds',
    'binaries': 'binaries', 'binary': 'binaries', 'bin': 'binaries',
    'generals': 'generals', 'general': 'generals', 'gen': 'generals',
    'sos': 'sos',
    'end': 'end',
}
_CONSTANT_COMMENT = re.compile(r'^\\\s*objective constant\s+(\S+)\s*$', re.IGNORECASE)
_OBJECTIVE_LINE = re.compile(r'^\s*#?\s*(?:=obj=|objective(?:\s+value)?)\s*[:=]?\s*(\S+)\s*$', re.IGNORECASE)



## Writing
##########

def _num(value: float) -> str:
    if math.isinf(value):
        return '+inf' if value > 0 else '-inf'
    return format(value, '.17g')

def _terms(terms: dict[int, float], names: list[str]) -> str:
    parts = []
    for i in sorted(terms):
        c = terms[i]
        if c == 0:
            continue
        parts.append(f"{'-' if c < 0 else '+'} {_num(abs(c))} {names[i]}")
    return ' '.join(parts) if parts else '0 ' + (names[0] if names else '')

def _bare_variable(expr: LinExpr) -> int | None:
    live = {i: c for i, c in expr.terms.items() if c != 0}
    if expr.constant == 0 and len(live) == 1:
        (i, c), = live.items()
        if c == 1.0:
            return i
    return None

def lp_text(program: ConicProgram) -> str:
    """The program as LP text; variable and row order follow creation order"""
    program.validate()
    names = [v.name for v in program.variables]
    extra_bounds: list[str] = []
    rows: list[str] = []

    for row in program.constraints:
        sense = '=' if row.sense == '==' else row.sense
        rows.append(f" {row.name}: {_terms(row.terms, names)} {sense} {_num(row.rhs)}")

    for cone in program.cones:
        squares = []
        for k, expr in enumerate(cone.tail):
            bare = _bare_variable(expr)
            if bare is None:
                aux = f"{cone.name}_t{k}"
                names_terms = {i: -c for i, c in expr.terms.items() if c != 0}
                definition = ' '.join([f"+ 1 {aux}", _terms(names_terms, names)]) if names_terms else f"+ 1 {aux}"
                rows.append(f" {aux}_def: {definition} = {_num(expr.constant)}")
                extra_bounds.append(f" {aux} free")
                squares.append(aux)
            else:
                squares.append(names[bare])
        body = ' + '.join(f"{s} ^2" for s in squares)
        head = names[cone.head]
        rows.append(f" {cone.name}: [ {body + ' - ' if body else '- '}{head} ^2 ] <= 0")

    lines = [f"\\ gridshift program {program.name}"]
    lines.append('Maximize' if program.sense == 'max' else 'Minimize')
    lines.append(f" obj: {_terms(program.objective.terms, names)}")
    if program.objective.constant:
        lines.append(f"\\ objective constant {_num(program.objective.constant)}")
    lines.append('Subject To')
    lines.extend(rows)

    lines.append('Bounds')
    for v in program.variables:
        if v.kind == 'binary' and v.lb == 0 and v.ub == 1:
            continue
        if v.lb == -math.inf and v.ub == math.inf:
            lines.append(f" {v.name} free")
        elif v.ub == math.inf:
            if v.lb != 0:
                lines.append(f" {v.name} >= {_num(v.lb)}")
        else:
            lines.append(f" {_num(v.lb)} <= {v.name} <= {_num(v.ub)}")
    lines.extend(extra_bounds)

    binaries = [v.name for v in program.variables if v.kind == 'binary']
    if binaries:
        lines.append('Binaries')
        lines.extend(f" {name}" for name in binaries)
    if program.sos1:
        lines.append('SOS')
        for sos in program.sos1:
            members = ' '.join(f"{names[i]}:{k + 1}" for k, i in enumerate(sos.members))
            lines.append(f" {sos.name}: S1:: {members}")
    lines.append('End')
    return '\n'.join(lines) + '\n'

def write_lp_file(program: ConicProgram, path: str | Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(lp_text(program))
    except OSError as e:
        raise LpFormatError(f"could not write `{path}`: {e}")
    logger.info("Wrote %r to %s", program, path)
    return path



## Reading
##########

def _section(line: str) -> str | None:
    return _SECTION_WORDS.get(' '.join(line.lower().split()))

def _parse_expr(tokens: list[str], lookup, where: str) -> LinExpr:
    expr = LinExpr()
    sign, coef = 1.0, None
    for token in tokens:
        if token == '+':
            continue
        if token == '-':
            sign = -sign
            continue
        try:
            value = float(token)
        except ValueError:
            var = lookup(token)
            expr._iadd(var, sign * (1.0 if coef is None else coef))
            sign, coef = 1.0, None
            continue
        if coef is not None:
            raise LpFormatError(f"{where}: two numbers in a row near `{token}`")
        coef = value
    if coef is not None:
        expr._iadd(sign * coef)
    return expr

def read_lp_text(text: str, name: str = 'program') -> ConicProgram:
    """Parse LP text in the documented grammar back into a ConicProgram"""
    program = ConicProgram(name)
    section = None
    constant = 0.0
    objective_tokens: list[str] = []
    rows: list[tuple[str, str]] = []
    bounds: list[str] = []
    binaries: list[str] = []
    sos_lines: list[str] = []
    pending = ''

    for lineno, raw in enumerate(text.splitlines(), 1):
        match = _CONSTANT_COMMENT.match(raw.strip())
        if match:
            constant = float(match.group(1))
            continue
        line = raw.split('\\', 1)[0].strip()
        if not line:
            continue
        word = _section(line)
        if word is not None:
            if pending:
                raise LpFormatError(f"line {lineno}: unterminated row `{pending}`")
            if word in ('max', 'min'):
                program.sense = word
            if word == 'generals':
                raise LpFormatError(f"line {lineno}: general integers are not supported")
            section = word
            continue
        if section in ('max', 'min'):
            objective_tokens.extend(line.split(':', 1)[-1].split() if ':' in line else line.split())
        elif section == 'st':
            pending = f"{pending} {line}".strip()
            if re.search(r'(<=|>=|=<|=>|=|<|>)\s*\S+\s*$', pending):
                label, _, body = pending.partition(':')
                if not body:
                    raise LpFormatError(f"line {lineno}: rows must be named: `{pending}`")
                rows.append((label.strip(), body.strip()))
                pending = ''
        elif section == 'bounds':
            bounds.append(line)
        elif section == 'binaries':
            binaries.extend(line.split())
        elif section == 'sos':
            sos_lines.append(line)
        elif section == 'end':
            break
        else:
            raise LpFormatError(f"line {lineno}: text outside any section: `{line}`")

    # Variables in first-appearance order
    token_sources = [objective_tokens] + [body.replace('[', ' ').replace(']', ' ').split() for _, body in rows]
    for tokens in token_sources:
        for token in tokens:
            if re.match(r'^[A-Za-z_]', token) and not program.has_var(token):
                program.add_variable(token)
    for line in bounds:
        for token in line.replace('<=', ' ').replace('>=', ' ').split():
            if re.match(r'^[A-Za-z_]', token) and token.lower() not in ('free', 'inf', 'infinity') and not program.has_var(token):
                program.add_variable(token)
    for token in binaries:
        if not program.has_var(token):
            program.add_variable(token)

    for token in binaries:
        var = program.var(token)
        var.kind, var.lb, var.ub = 'binary', 0.0, 1.0
    for line in bounds:
        _apply_bound(program, line)

    program.set_objective(_parse_expr(objective_tokens, program.var, 'objective') + constant, program.sense)

    for label, body in rows:
        if body.startswith('['):
            _add_quadratic_row(program, label, body)
            continue
        match = re.match(r'^(.*?)(<=|>=|=<|=>|=|<|>)\s*(\S+)$', body)
        if match is None:
            raise LpFormatError(f"row `{label}`: cannot parse `{body}`")
        lhs, sense, rhs = match.groups()
        sense = {'=<': '<=', '<': '<=', '=>': '>=', '>': '>=', '=': '=='}.get(sense, sense)
        program.add_constraint(_parse_expr(lhs.split(), program.var, f"row `{label}`"), sense, float(rhs), name=label)

    for line in sos_lines:
        match = re.match(r'^(\S+):\s*S1::\s*(.*)$', line)
        if match is None:
            raise LpFormatError(f"cannot parse SOS entry `{line}`")
        members = [program.var(item.split(':')[0]) for item in match.group(2).split()]
        for member in members:
            member.lb = max(member.lb, 0.0)
        program.add_sos1(members, name=match.group(1))
    return program

def _apply_bound(program: ConicProgram, line: str) -> None:
    tokens = line.split()
    if len(tokens) == 2 and tokens[1].lower() == 'free':
        var = program.var(tokens[0])
        var.lb, var.ub = -math.inf, math.inf
        return
    if len(tokens) == 5 and tokens[1] == '<=' and tokens[3] == '<=':
        var = program.var(tokens[2])
        var.lb, var.ub = float(tokens[0]), float(tokens[4])
        return
    if len(tokens) == 3 and tokens[1] in ('<=', '>=', '='):
        var = program.var(tokens[0])
        value = float(tokens[2])
        if tokens[1] == '<=':
            var.ub = value
        elif tokens[1] == '>=':
            var.lb = value
        else:
            var.lb = var.ub = value
        return
    raise LpFormatError(f"cannot parse bound `{line}`")

def _add_quadratic_row(program: ConicProgram, label: str, body: str) -> None:
    match = re.match(r'^\[(.*)\]\s*<=\s*0+(\.0*)?$', body)
    if match is None:
        raise LpFormatError(f"row `{label}`: only cone rows `[ x ^2 + ... - y ^2 ] <= 0` are supported")
    tail, head, sign = [], None, 1.0
    for token in match.group(1).split():
        if token in ('+', '-'):
            sign = 1.0 if token == '+' else -1.0
        elif token == '^2':
            continue
        elif sign < 0:
            if head is not None:
                raise LpFormatError(f"row `{label}`: more than one negative square")
            head = program.var(token)
        else:
            tail.append(program.var(token))
    if head is None:
        raise LpFormatError(f"row `{label}`: no head variable")
    head.lb = max(head.lb, 0.0)
    program.add_cone(head, tail, name=label)

def read_lp_file(path: str | Path) -> ConicProgram:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise LpFormatError(f"could not read `{path}`: {e}")
    return read_lp_text(text, path.stem)



## Solutions
############

def write_solution_file(result: SolveResult, program: ConicProgram, path: str | Path) -> Path:
    if result.x is None:
        raise LpFormatError(f"result with status `{result.status}` has no solution to write")
    path = Path(path)
    lines = [f"objective {_num(result.objective)}"]
    lines.extend(f"{v.name} {_num(float(result.x[v.index]))}" for v in program.variables)
    path.write_text('\n'.join(lines) + '\n')
    return path

def read_solution_file(path: str | Path, program: ConicProgram) -> SolveResult:
    """Parse `<name> <value>` lines plus an objective header

    Lines that cannot be parsed are skipped until the first value line; afterwards they are
    errors. Values of names the program does not know are ignored; every program variable
    must be present.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise LpFormatError(f"could not read solution `{path}`: {e}")

    objective = None
    values: dict[str, float] = {}
    seen_value = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        match = _OBJECTIVE_LINE.match(line)
        if match:
            try:
                objective = float(match.group(1))
                continue
            except ValueError:
                pass
        tokens = line.split()
        parsed = None
        if len(tokens) >= 2 and not tokens[0].startswith('#'):
            try:
                parsed = (tokens[0], float(tokens[1]))
            except ValueError:
                parsed = None
        if parsed is None:
            if seen_value:
                raise LpFormatError(f"{path}:{lineno}: cannot parse `{line}`")
            logger.debug("Skipping solution header line %r", line)
            continue
        seen_value = True
        name, value = parsed
        if program.has_var(name):
            values[name] = value

    missing = [v.name for v in program.variables if v.name not in values]
    if missing:
        raise LpFormatError(f"solution `{path}` is missing variable `{missing[0]}`" + (f" and {len(missing) - 1} more" if len(missing) > 1 else ""))

    x = np.array([values[v.name] for v in program.variables])
    computed = program.objective.value(x)
    if objective is None:
        objective = computed
    elif abs(objective - computed) > 1e-6 * max(1.0, abs(computed)):
        logger.warning("Solution objective %.10g differs from the recomputed %.10g", objective, computed)
    return SolveResult(status='optimal', objective=objective, values=values, x=x, best_bound=objective)



## External backend
###################

class ExternalSolver:
    """Run a user-configured solver command on an exported LP file

    The command template comes from the argument or GRIDSHIFT_SOLVER_CMD and must contain
    `{lp}` and `{sol}` placeholders, e.g. `mysolver --model {lp} --write {sol}`.
    """

    def __init__(self, command: str | None = None, timeout: float | None = None):
        self.command = command or os.environ.get(SOLVER_CMD_ENV)
        self.timeout = timeout
        if not self.command:
            raise SolverError(f"external backend needs a command template in ${SOLVER_CMD_ENV}")
        if '{lp}' not in self.command or '{sol}' not in self.command:
            raise SolverError("external solver command must contain `{lp}` and `{sol}` placeholders")

    def solve(self, program: ConicProgram) -> SolveResult:
        with tempfile.TemporaryDirectory(prefix='gridshift-') as tmp:
            lp_path = write_lp_file(program, Path(tmp) / f"{program.name}.lp")
            sol_path = Path(tmp) / f"{program.name}.sol"
            args = shlex.split(self.command.format(lp=str(lp_path), sol=str(sol_path)))
            logger.info("Running external solver: %s", ' '.join(args))
            try:
                proc = subprocess.run(args, capture_output=True, text=True, timeout=self.timeout)
            except (OSError, subprocess.TimeoutExpired) as e:
                raise SolverError(f"external solver failed to run: {e}")
            if proc.returncode != 0:
                raise SolverError(f"external solver exited with {proc.returncode}: {proc.stderr.strip()[-500:]}")
            if not sol_path.exists() or not sol_path.read_text().strip():
                return SolveResult(status='infeasible', stats=SolveStats())
            result = read_solution_file(sol_path, program)
        return result
