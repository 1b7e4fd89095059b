"""Transient queue-length dynamics and equilibrium-density extraction.

The queue-length distribution p_0..p_Nmax evolves as a truncated
birth-death chain with time-varying birth rate lam*f(t) and death rate mu.
Along an equilibrium support the arrival density f is pinned by the
requirement that the expected arrival cost is flat in t, which yields one
extraction formula for t < 0 and another for t >= 0.
"""

from dataclasses import dataclass, field

import numpy as np

from .costs import erlang_tail_table
from .errors import NegativeDensity, NegativeProbability, NonpositiveCoefficient
from .params import ModelParams, SolverConfig

MASS_TOL = 1e-9


@dataclass
class StateDistribution:
    """Truncated queue-length probabilities at one time instant."""

    probs: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)

    @property
    def nmax(self):
        return len(self.probs) - 1

    @classmethod
    def empty(cls, nmax, t=0.0):
        p = np.zeros(nmax + 1)
        p[0] = 1.0
        return cls(p, t)

    def check(self):
        total = float(self.probs.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise NegativeProbability(f"probability mass {total} drifted past tolerance")
        if float(self.probs.min()) < -MASS_TOL:
            raise NegativeProbability("negative probability entry")
        return self


@dataclass
class DensityCurve:
    """Arrival strategy: gridded density plus point masses.

    `discontinuities` lists (time, left value, right value); the grid itself
    holds the right-limit values at those times.
    """

    grid: np.ndarray
    values: np.ndarray
    atoms: list = field(default_factory=list)
    discontinuities: list = field(default_factory=list)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)

    def density_mass(self):
        if len(self.grid) < 2:
            return 0.0
        mass = float(np.trapezoid(self.values, self.grid))
        # segments ending at a marked jump integrate up to the left value
        for t, f_left, _ in self.discontinuities:
            i = int(np.searchsorted(self.grid, t))
            if 0 < i < len(self.grid) and self.grid[i] == t:
                mass += 0.5 * (f_left - self.values[i]) * (t - self.grid[i - 1])
        return mass

    def atom_mass(self):
        return float(sum(m for _, m in self.atoms))

    def total_mass(self):
        return self.density_mass() + self.atom_mass()

    @property
    def support(self):
        times = list(self.grid[:1]) + list(self.grid[-1:]) + [t for t, _ in self.atoms]
        return (min(times), max(times))


def _generator_apply(p, birth, mu):
    """One application of the truncated birth-death generator."""
    d = np.empty_like(p)
    d[0] = mu * p[1] - birth * p[0]
    if len(p) > 2:
        d[1:-1] = -(mu + birth) * p[1:-1] + birth * p[:-2] + mu * p[2:]
    d[-1] = -mu * p[-1] + birth * p[-2]
    return d


def step_state(state: StateDistribution, f_value, dt, params: ModelParams):
    """Advance the distribution one explicit RK4 step with density frozen
    at f_value.  Total mass is preserved by construction (generator rows
    sum to zero)."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if f_value < 0:
        raise ValueError("f_value must be >= 0")
    birth = params.lam * f_value
    p = state.probs
    k1 = _generator_apply(p, birth, params.mu)
    k2 = _generator_apply(p + 0.5 * dt * k1, birth, params.mu)
    k3 = _generator_apply(p + 0.5 * dt * k2, birth, params.mu)
    k4 = _generator_apply(p + dt * k3, birth, params.mu)
    out = p + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if float(out.min()) < -1e-9:
        raise NegativeProbability(
            f"p went to {out.min():.3e} after one step; dt={dt} is too large"
        )
    return StateDistribution(out, state.t + dt)


def mean_queue_length(probs):
    return float(np.arange(len(probs)) @ probs)


def expected_queue(state: StateDistribution, params: ModelParams):
    """Expected waiting time E[N]/mu implied by the state."""
    return mean_queue_length(state.probs) / params.mu


def _density_negative(probs, t, params: ModelParams):
    """Flat-cost density for t <= 0 given the current state.

    Substituting the birth-death dynamics into the zero-derivative condition
    for the t<0 cost branch collapses to a single linear equation in f: the
    death and tail-derivative contributions cancel exactly (the deferred
    workload (t + S_N)^+ is pathwise constant absent arrivals).
    """
    n = len(probs) - 1
    tails = erlang_tail_table(n + 1, -t, params.mu)  # P(S_k > -t), k = 0..n+1
    mix = float(probs @ tails[1:])  # sum_j p_j P(S_{j+1} > -t)
    coeff = params.lam * (params.alpha + params.beta2 * mix) / params.mu
    if coeff <= 0:
        raise NonpositiveCoefficient(f"f coefficient {coeff} <= 0: corrupted state")
    rhs = params.beta1 + params.alpha * (1.0 - probs[0])
    f = rhs / coeff
    if f < 0:
        raise NegativeDensity(f"extracted density {f} < 0")
    return f


def density_negative_t(state: StateDistribution, t, params: ModelParams):
    """Equilibrium density at t < 0: the unique f >= 0 keeping the expected
    cost flat under the current state."""
    if t >= 0:
        raise ValueError("density_negative_t requires t < 0")
    return _density_negative(state.probs, t, params)


def _density_positive(p0, params: ModelParams):
    return (1.0 - p0) * params.mu / params.lam - params.beta2 * params.mu / (
        (params.alpha + params.beta2) * params.lam
    )


def density_positive_t(state: StateDistribution, params: ModelParams):
    """Equilibrium density at t >= 0; a nonpositive value signals that the
    support ends (p0 has risen to alpha/(alpha+beta2))."""
    return _density_positive(float(state.probs[0]), params)


def auto_dt(params: ModelParams, cfg: SolverConfig):
    """Fixed step keeping (birth + death) * dt small; tightens with epsilon."""
    if cfg.dt is not None:
        return cfg.dt
    # bounds on lam*f: mu*(beta1+alpha)/alpha for t<0, mu for t>=0
    rate = params.mu * max(2.0, (params.beta1 + 2.0 * params.alpha) / params.alpha)
    return min(0.05, 5.0 * cfg.epsilon) / rate
