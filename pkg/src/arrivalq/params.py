"""Game primitives and solver configuration."""

import math
from dataclasses import dataclass, replace

from .errors import ConfigInvalid

STOCHASTIC = "stochastic"
FLUID = "fluid"


@dataclass(frozen=True)
class ModelParams:
    """Primitives of the arrival-timing game.

    `lam` is the expected population size in the stochastic model and the
    total customer volume in the fluid model; `kind` records which reading
    applies.  Arrivals are allowed on [-t1, t2]; either bound may be
    `math.inf`.
    """

    kind: str
    lam: float
    mu: float
    alpha: float
    beta1: float
    beta2: float
    t1: float = math.inf
    t2: float = math.inf

    def __post_init__(self):
        if self.kind not in (STOCHASTIC, FLUID):
            raise ConfigInvalid(f"unknown model kind {self.kind!r}")
        for name in ("lam", "mu", "alpha", "beta1", "beta2"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigInvalid(f"{name} must be finite and > 0, got {v!r}")
        for name in ("t1", "t2"):
            v = getattr(self, name)
            if not (v > 0):  # inf allowed
                raise ConfigInvalid(f"{name} must be > 0 or inf, got {v!r}")

    @classmethod
    def stochastic(cls, lam, mu, alpha, beta1, beta2, t1=math.inf, t2=math.inf):
        return cls(STOCHASTIC, lam, mu, alpha, beta1, beta2, t1, t2)

    @classmethod
    def fluid(cls, volume, mu, alpha, beta1, beta2, t1=math.inf, t2=math.inf):
        return cls(FLUID, volume, mu, alpha, beta1, beta2, t1, t2)

    @property
    def is_stochastic(self):
        return self.kind == STOCHASTIC

    @property
    def is_fluid(self):
        return self.kind == FLUID

    def as_fluid(self):
        """Same primitives read as a fluid model (volume = lam)."""
        return replace(self, kind=FLUID)

    def as_stochastic(self):
        return replace(self, kind=STOCHASTIC)

    def unconstrained(self):
        return replace(self, t1=math.inf, t2=math.inf)


@dataclass(frozen=True)
class SolverConfig:
    """Numerical knobs.

    epsilon          convergence bound on the integral/indifference conditions
    dt               ODE step; None picks a step from the rate bound
                     (birth + death rate) * dt <= 0.05, tightened with epsilon
    nmax_tail_prob   Poisson tail mass defining the truncation level N_max
    mc_reps          Monte Carlo replications
    seed             RNG seed (counter-based Philox streams)
    """

    epsilon: float = 1e-2
    dt: float | None = None
    nmax_tail_prob: float = 1e-2
    mc_reps: int = 10_000
    seed: int = 0
    max_bisect: int = 200

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigInvalid("epsilon must be > 0")
        if self.dt is not None and not self.dt > 0:
            raise ConfigInvalid("dt must be > 0")
        if not 0 < self.nmax_tail_prob < 1:
            raise ConfigInvalid("nmax_tail_prob must be in (0, 1)")
        if self.mc_reps < 1:
            raise ConfigInvalid("mc_reps must be >= 1")
