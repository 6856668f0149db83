"""Exception tree shared by every gridshift module"""

from __future__ import annotations



class GridshiftError(Exception):
    """Base class for all gridshift errors"""
    def __init__(self, msg: str):
        self.msg = msg
        super().__init__(self.msg)

    def __repr__(self) -> str:
        return self.msg



## Input data
#############

class GridDataError(GridshiftError):
    """Raised when grid data is malformed or inconsistent"""

class PolicyError(GridshiftError):
    """Raised when an actor policy or the economics block is invalid"""

class ConfigError(GridshiftError):
    """Raised for an unusable run configuration or command-line combination"""



## Modelling
############

class UncertaintyError(GridshiftError):
    """Raised for invalid chance-constraint inputs (quantile domain, participation factors)"""

class MarketError(GridshiftError):
    """Raised when the wholesale market cannot be built"""

class MpecError(GridshiftError):
    """Raised when a strategic actor program cannot be assembled or linearized"""

class RpsInfeasibleError(MpecError):
    """Raised when a renewable portfolio target is unreachable under the capital budget"""
    def __init__(self, state: str, day: str, required: float, reachable: float):
        self.state = state
        self.day = day
        self.required = required
        self.reachable = reachable
        super().__init__(
            f"{state}: renewable target unreachable on day `{day}`: "
            f"requires {required:.3f} MWh, at most {reachable:.3f} MWh reachable within budget"
        )

class HedgingError(GridshiftError):
    """Raised by the progressive hedging coordinator"""
    def __init__(self, msg: str, actor: str | None = None, iteration: int | None = None, status: str | None = None):
        self.actor = actor
        self.iteration = iteration
        self.status = status
        prefix = ""
        if actor is not None:
            prefix += f"actor `{actor}`"
        if iteration is not None:
            prefix += f"{', ' if prefix else ''}iteration {iteration}"
        super().__init__(f"{prefix}: {msg}" if prefix else msg)

class BenchmarkError(GridshiftError):
    """Raised when the centralized planning benchmark cannot be built"""

class ScenarioMismatchError(GridshiftError):
    """Raised when two results being compared were not produced from the same case"""



## Solving
##########

class ProgramError(GridshiftError):
    """Raised when a ConicProgram violates one of its structural invariants"""

class SolverError(GridshiftError):
    """Raised on numerical failure of a backend; never swallowed"""

class LpFormatError(GridshiftError):
    """Raised for malformed LP or solution text"""
