"""Error types shared across the solvers and the CLI."""


class SolverError(Exception):
    """Base class; `code` is the machine-readable identifier."""

    code = "SOLVER_ERROR"
    exit_code = 1


class ConfigInvalid(SolverError):
    code = "CONFIG_INVALID"
    exit_code = 2


class NoConvergence(SolverError):
    code = "NO_CONVERGENCE"
    exit_code = 3


class TruncationBreach(SolverError):
    code = "TRUNCATION_BREACH"
    exit_code = 4


class NegativeProbability(SolverError):
    code = "NEGATIVE_PROBABILITY"
    exit_code = 5


class NegativeDensity(SolverError):
    code = "NEGATIVE_DENSITY"
    exit_code = 6


class NonpositiveCoefficient(SolverError):
    code = "NONPOSITIVE_COEFFICIENT"
    exit_code = 7


class InfeasibleGap(SolverError):
    code = "INFEASIBLE_GAP"
    exit_code = 8


class MassMismatch(SolverError):
    code = "MASS_MISMATCH"
    exit_code = 9


class InvalidRegime(SolverError):
    code = "INVALID_REGIME"
    exit_code = 10
