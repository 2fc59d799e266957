"""
Error hierarchy. Usage errors map to exit code 64 in the command line front end,
everything else under PolyApproxError maps to exit code 2.
"""


class PolyApproxError(Exception):
    """Root of every error raised by this package."""


class UsageError(PolyApproxError, ValueError):
    """Inputs are malformed: dimension mismatch, bad document, bad configuration."""


class SpecError(UsageError):
    """A region, model or run document could not be parsed."""


class SolverError(PolyApproxError, RuntimeError):
    """A numerical routine failed."""


class CyclingError(SolverError):
    def __init__(self, pivots: int):
        super().__init__(f"Simplex exceeded its pivot cap after {pivots} pivots")
        self.pivots = pivots


class InfeasibleRegionError(SolverError):
    """The constraint system of a projection has no feasible point."""


class ConvergenceError(SolverError):
    def __init__(self, message: str, gap: float):
        super().__init__(f"{message} (gap {gap:.3e})")
        self.gap = gap


class EmptyPolytopeError(SolverError):
    pass


class UnboundedPolytopeError(SolverError):
    pass


class ZeroRowError(UsageError):
    def __init__(self, row: int):
        super().__init__(f"Row {row} of A has (numerically) zero norm")
        self.row = row


class EmptyRegionError(SolverError):
    pass


class UnboundedRegionError(SolverError):
    pass


class ConsistencyError(SolverError):
    """An internal invariant was found violated."""


class NonFiniteError(SolverError):
    pass


class TrainingAborted(PolyApproxError):
    """
    Training stopped on an error. `last_good` holds the last parameters that passed
    every check (a Polytope or MlpParams) and `history` the records up to that point.
    """

    def __init__(self, message: str, last_good=None, history=None, cause: Exception = None):
        super().__init__(message)
        self.last_good = last_good
        self.history = history
        self.cause = cause
