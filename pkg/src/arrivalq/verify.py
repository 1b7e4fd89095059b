"""Monte Carlo verification: simulate a Poisson population playing a
candidate strategy through the FIFO exponential queue, estimate arrival
costs, and audit the strategy for epsilon-equilibrium by unilateral
deviation over a time grid.

Replications are vectorized; a counter-based Philox stream makes every
report reproducible, and deviation costs share the population and service
draws (common random numbers) so grid differences are low-variance.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import EquilibriumSolution, solve
from .errors import MassMismatch
from .fluid import FluidSolution, fluid_equilibrium
from .kolmogorov import DensityCurve
from .params import ModelParams, SolverConfig


@dataclass
class SimulationReport:
    grid_costs: list  # (deviation time, mean cost, standard error)
    equilibrium_cost_estimate: float
    equilibrium_cost_se: float
    min_deviation_cost: float
    epsilon_violation: float
    reps: int
    seed: int


@dataclass
class DiagnosticReport:
    """Stochastic-vs-fluid comparison at matched population size."""

    stochastic_te1: float
    fluid_te1: float
    stochastic_atom: float
    fluid_atom: float
    stochastic_case: str
    fluid_case: str
    flags: list = field(default_factory=list)


class StrategySampler:
    """Inverse-CDF sampler for a mixed strategy (atoms + density).

    Nodes carry left/right CDF values; between nodes the CDF is linear.
    """

    def __init__(self, xs, f_left, f_right):
        self.xs = np.asarray(xs, dtype=float)
        self.f_left = np.asarray(f_left, dtype=float)
        self.f_right = np.asarray(f_right, dtype=float)

    @classmethod
    def from_strategy(cls, strategy, tol=0.05):
        if isinstance(strategy, EquilibriumSolution):
            strategy = strategy.strategy
        if isinstance(strategy, DensityCurve):
            if len(strategy.grid) >= 2:
                cum = np.concatenate(
                    [[0.0], np.cumsum(np.diff(strategy.grid)
                                      * 0.5 * (strategy.values[1:] + strategy.values[:-1]))])
                nodes = (strategy.grid, cum)
            else:
                nodes = (np.empty(0), np.empty(0))
            return cls._assemble(nodes, strategy.atoms, tol)
        if isinstance(strategy, FluidSolution):
            ts, cs = [], []
            cum = 0.0
            for s, e, f in sorted(strategy.segments):
                ts += [s, e]
                cs += [cum, cum + f * (e - s)]
                cum += f * (e - s)
            return cls._assemble((np.asarray(ts), np.asarray(cs)), strategy.atoms, tol)
        raise TypeError(f"cannot sample from {type(strategy)!r}")

    @classmethod
    def _assemble(cls, density_nodes, atoms, tol):
        dts, dcs = density_nodes
        if len(dts):
            order = np.argsort(dts, kind="stable")
            dts, dcs = dts[order], dcs[order]

        def density_cum(x):
            if len(dts) == 0:
                return 0.0
            return float(np.interp(x, dts, dcs, left=0.0, right=dcs[-1]))

        jump = {}
        for t, m in atoms:
            jump[float(t)] = jump.get(float(t), 0.0) + m
        times = sorted(set(jump) | set(float(t) for t in dts))
        xs, fl, fr = [], [], []
        acc = 0.0  # atom mass strictly before / including the node
        for t in times:
            d = density_cum(t)
            xs.append(t)
            fl.append(acc + d)
            acc += jump.get(t, 0.0)
            fr.append(acc + d)
        total = fr[-1]
        if abs(total - 1.0) > tol:
            raise MassMismatch(f"strategy mass {total} is not 1 within {tol}")
        return cls(np.asarray(xs), np.asarray(fl) / total, np.asarray(fr) / total)

    def cdf(self, x, side="right"):
        x = np.asarray(x, dtype=float)
        lookup = "right" if side == "right" else "left"
        idx = np.searchsorted(self.xs, x, side=lookup) - 1
        inside = idx >= 0
        i = np.clip(idx, 0, len(self.xs) - 1)
        nxt = np.clip(i + 1, 0, len(self.xs) - 1)
        x0, x1 = self.xs[i], self.xs[nxt]
        y0, y1 = self.f_right[i], self.f_left[nxt]
        span = np.where(x1 > x0, x1 - x0, 1.0)
        frac = np.clip((x - x0) / span, 0.0, 1.0)
        out = np.where(inside, y0 + frac * (y1 - y0), 0.0)
        top = 1.0 if side == "right" else self.f_left[-1]
        out = np.where(x >= self.xs[-1], np.where(x > self.xs[-1], 1.0, top), out)
        return out

    def sample(self, u):
        """Inverse CDF at u in [0,1)."""
        u = np.asarray(u, dtype=float)
        k = np.searchsorted(self.f_right, u, side="right")
        k = np.clip(k, 0, len(self.xs) - 1)
        in_jump = u >= self.f_left[k]
        x0 = self.xs[k]
        prev = np.clip(k - 1, 0, len(self.xs) - 1)
        y0 = self.f_right[prev]
        y1 = self.f_left[k]
        xp = self.xs[prev]
        span = np.where(y1 > y0, y1 - y0, 1.0)
        frac = np.clip((u - y0) / span, 0.0, 1.0)
        interp = xp + frac * (x0 - xp)
        return np.where(in_jump, x0, interp)


def _population(sampler, params, cfg):
    """Draw the replicated population and push it through the queue."""
    rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    reps = cfg.mc_reps
    n = rng.poisson(params.lam, reps)
    m = max(int(n.max()), 1)
    u = rng.random((reps, m))
    tie = rng.random((reps, m))
    tie_dev = rng.random(reps)
    u_tag = rng.random(reps)
    arrivals = sampler.sample(u)
    pad = np.arange(m) >= n[:, None]
    arrivals = np.where(pad, np.inf, arrivals)
    order = np.argsort(arrivals, axis=1, kind="stable")
    arrivals = np.take_along_axis(arrivals, order, axis=1)
    tie = np.take_along_axis(tie, order, axis=1)
    services = rng.exponential(1.0 / params.mu, (reps, m))
    s_before = np.cumsum(services, axis=1) - services
    starts = s_before + np.maximum.accumulate(
        np.where(np.isinf(arrivals), -np.inf, arrivals) - s_before, axis=1)
    finishes = starts + services
    real = ~np.isinf(arrivals)
    costs = np.where(
        real,
        params.beta1 * np.maximum(-arrivals, 0.0)
        + params.alpha * (starts - arrivals)
        + params.beta2 * np.maximum(starts, 0.0),
        0.0,
    )
    return {
        "n": n, "arrivals": arrivals, "tie": tie, "tie_dev": tie_dev,
        "u_tag": u_tag, "starts": starts, "finishes": finishes,
        "costs": costs, "real": real,
    }


def _conforming_estimate(pop):
    """Mean cost of a population customer (ratio estimator over reps)."""
    c_r = pop["costs"].sum(axis=1)
    n_r = pop["n"].astype(float)
    total_n = n_r.sum()
    if total_n == 0:
        return 0.0, 0.0
    mean = c_r.sum() / total_n
    resid = c_r - mean * n_r
    se = math.sqrt(float((resid**2).sum())) / total_n
    return float(mean), se


def _added_customer_costs(pop, params, t_dev):
    """Cost of one added customer arriving at t_dev (scalar or per-rep
    vector) in every replication; the customer does not affect the others."""
    arrivals, tie = pop["arrivals"], pop["tie"]
    t_dev = np.broadcast_to(np.asarray(t_dev, dtype=float), arrivals.shape[:1])
    col = t_dev[:, None]
    ahead = (arrivals < col).sum(axis=1)
    at_tie = arrivals == col
    if at_tie.any():
        ahead = ahead + (at_tie & (tie < pop["tie_dev"][:, None])).sum(axis=1)
    idx = np.clip(ahead - 1, 0, arrivals.shape[1] - 1)
    clear = np.take_along_axis(pop["finishes"], idx[:, None], axis=1)[:, 0]
    clear = np.where(ahead == 0, -np.inf, clear)
    start = np.maximum(t_dev, clear)
    return (params.beta1 * np.maximum(-t_dev, 0.0)
            + params.alpha * (start - t_dev)
            + params.beta2 * np.maximum(start, 0.0))


def simulate_population(strategy, params: ModelParams, cfg: SolverConfig):
    """Estimate the expected cost of a customer playing `strategy` along
    with everyone else."""
    sampler = StrategySampler.from_strategy(strategy, tol=max(cfg.epsilon, 1e-6))
    pop = _population(sampler, params, cfg)
    mean, se = _conforming_estimate(pop)
    return SimulationReport(
        grid_costs=[], equilibrium_cost_estimate=mean, equilibrium_cost_se=se,
        min_deviation_cost=mean, epsilon_violation=0.0,
        reps=cfg.mc_reps, seed=cfg.seed,
    )


def best_response_audit(strategy, params: ModelParams, cfg: SolverConfig, grid):
    """Estimate deviation costs over `grid` under common random numbers and
    report the epsilon-equilibrium violation.

    The conforming benchmark is an added customer whose arrival time is
    drawn from the strategy; each grid deviation reuses the same population,
    service and tie-break draws, so the paired differences are low-variance.
    """
    sampler = StrategySampler.from_strategy(strategy, tol=max(cfg.epsilon, 1e-6))
    pop = _population(sampler, params, cfg)
    # conforming benchmark: average the added customer's cost over the
    # strategy's quantile midpoints, against the same common-random queues
    # as every grid deviation
    n_quantiles = 64
    t_q = sampler.sample((np.arange(n_quantiles) + 0.5) / n_quantiles)
    conf = np.zeros(cfg.mc_reps)
    for tq in t_q:
        conf += _added_customer_costs(pop, params, float(tq))
    conf /= n_quantiles
    conforming = float(conf.mean())
    se0 = float(conf.std(ddof=1) / math.sqrt(len(conf)))
    grid_costs = []
    min_dev = math.inf
    for t_dev in grid:
        c = _added_customer_costs(pop, params, float(t_dev))
        mean_c = float(c.mean())
        grid_costs.append((float(t_dev), mean_c,
                           float(c.std(ddof=1) / math.sqrt(len(c)))))
        min_dev = min(min_dev, mean_c)
    return SimulationReport(
        grid_costs=grid_costs,
        equilibrium_cost_estimate=conforming,
        equilibrium_cost_se=se0,
        min_deviation_cost=min_dev,
        epsilon_violation=max(conforming - min_dev, 0.0),
        reps=cfg.mc_reps, seed=cfg.seed,
    )


def audit_grid(solution, params, margin=0.25, points=24):
    """Default deviation grid: support plus a margin on both sides, with
    the atom time included when there is one."""
    lo, hi = _support_of(solution)
    span = max(hi - lo, 1.0 / params.mu)
    lo -= margin * span
    hi += margin * span
    grid = list(np.linspace(lo, hi, points))
    atoms = getattr(getattr(solution, "strategy", solution), "atoms", [])
    for t, _ in atoms:
        grid.append(float(t))
    return sorted(set(grid))


def _support_of(solution):
    strategy = solution.strategy if isinstance(solution, EquilibriumSolution) else solution
    return strategy.support


def fluid_stochastic_diagnostic(params: ModelParams, cfg: SolverConfig):
    """Solve both models at matched population size and compare the
    earliest-arrival magnitude (and atom size, when one forms).

    The stochastic values exceeding the fluid ones is an observed
    regularity, not a theorem, so disagreements are flagged, not fatal.
    """
    stoch = solve(params.as_stochastic(), cfg)
    fl = fluid_equilibrium(params.as_fluid())
    fl_te1 = -fl.support[0]
    st_te1 = stoch.te1
    st_atom = stoch.atom_mass
    fl_atom = sum(m for t, m in fl.atoms)
    flags = []
    if st_te1 < fl_te1 - 1e-9:
        flags.append("stochastic_te1_not_larger")
    if (st_atom > 0 or fl_atom > 0) and st_atom < fl_atom - 1e-9:
        flags.append("stochastic_atom_not_larger")
    return DiagnosticReport(
        stochastic_te1=st_te1, fluid_te1=fl_te1,
        stochastic_atom=st_atom, fluid_atom=fl_atom,
        stochastic_case=stoch.case_label, fluid_case=fl.case_label,
        flags=flags,
    )
