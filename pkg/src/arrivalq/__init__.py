"""arrivalq: equilibrium arrival-timing solver for a single-server queue
with earliness, tardiness and waiting costs.

Stochastic (Poisson population, exponential service) and fluid models,
with or without opening/closing-time constraints, plus a Monte Carlo
equilibrium auditor.
"""

from .backend import BACKEND
from .costs import cost_at, erlang_tail, expected_positive_part, g1, g2
from .equilibrium import (
    EquilibriumSolution,
    classify_constrained,
    solve,
    solve_constrained,
    solve_unconstrained,
)
from .fluid import (
    FluidSolution,
    fluid_equilibrium,
    fluid_social_optimum,
    price_of_anarchy,
)
from .verify import (
    SimulationReport,
    StrategySampler,
    best_response_audit,
    fluid_stochastic_diagnostic,
    simulate_population,
)
from .errors import (
    ConfigInvalid,
    InfeasibleGap,
    InvalidRegime,
    MassMismatch,
    NegativeDensity,
    NegativeProbability,
    NoConvergence,
    NonpositiveCoefficient,
    SolverError,
    TruncationBreach,
)
from .kolmogorov import (
    DensityCurve,
    StateDistribution,
    density_negative_t,
    density_positive_t,
    expected_queue,
    step_state,
)
from .params import ModelParams, SolverConfig

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ModelParams",
    "SolverConfig",
    "StateDistribution",
    "DensityCurve",
    "EquilibriumSolution",
    "FluidSolution",
    "SimulationReport",
    "StrategySampler",
    "solve",
    "solve_unconstrained",
    "solve_constrained",
    "classify_constrained",
    "fluid_equilibrium",
    "fluid_social_optimum",
    "price_of_anarchy",
    "simulate_population",
    "best_response_audit",
    "fluid_stochastic_diagnostic",
    "erlang_tail",
    "expected_positive_part",
    "cost_at",
    "g1",
    "g2",
    "step_state",
    "expected_queue",
    "density_negative_t",
    "density_positive_t",
    "SolverError",
    "ConfigInvalid",
    "NoConvergence",
    "TruncationBreach",
    "NegativeProbability",
    "NegativeDensity",
    "NonpositiveCoefficient",
    "InfeasibleGap",
    "MassMismatch",
    "InvalidRegime",
]
