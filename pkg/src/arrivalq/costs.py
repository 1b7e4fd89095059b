"""Cost primitives: Erlang tails, deferred-service expectations, the
per-arrival cost functional, and the opening-atom cost functions g1/g2.

Everything here is a pure function of its inputs.  Series are evaluated by
multiplicative recurrences on the terms (never through factorials), so that
large mu*x and lam stay in range.
"""

import math

import numpy as np

from .params import ModelParams, SolverConfig

# cumprod of x/m overflows beyond this; fall back to the scalar recurrence
_CUMPROD_SAFE_X = 650.0


def _scaled_poisson_terms(x, nmax):
    """Array of e^-x * x^m / m! for m = 0..nmax."""
    if nmax < 0:
        return np.zeros(0)
    if x == 0.0:
        out = np.zeros(nmax + 1)
        out[0] = 1.0
        return out
    if x <= _CUMPROD_SAFE_X:
        ratios = np.empty(nmax + 1)
        ratios[0] = 1.0
        if nmax >= 1:
            ratios[1:] = x / np.arange(1, nmax + 1)
        return math.exp(-x) * np.cumprod(ratios)
    # keep the running term scaled so nothing overflows
    out = np.empty(nmax + 1)
    term = 0.0  # log-scale start
    out[0] = math.exp(-x) if x < 745 else 0.0
    t = out[0]
    for m in range(1, nmax + 1):
        t *= x / m
        out[m] = t
    return out


def poisson_pmf_table(lam, nmax):
    """P(N = n) for n = 0..nmax, N ~ Poisson(lam)."""
    return _scaled_poisson_terms(lam, nmax)


def truncation_level(lam, tail_prob):
    """Smallest n with P(N > n) <= tail_prob for N ~ Poisson(lam)."""
    if lam <= 0:
        return 0
    cap = int(lam + 20.0 * math.sqrt(lam) + 60)
    pmf = poisson_pmf_table(lam, cap)
    cdf = np.cumsum(pmf)
    idx = np.searchsorted(cdf, 1.0 - tail_prob)
    return int(min(idx, cap))


def erlang_tail_table(kmax, x, mu):
    """P(S_k > x) for k = 0..kmax, S_k ~ Erlang(k, mu), x >= 0."""
    if x < 0:
        raise ValueError("x must be >= 0")
    terms = _scaled_poisson_terms(mu * x, max(kmax - 1, -1))
    out = np.empty(kmax + 1)
    out[0] = 0.0
    if kmax >= 1:
        out[1:] = np.minimum(np.cumsum(terms), 1.0)
    return out


def erlang_tail(k, x, mu):
    """P(S_k > x) for S_k ~ Erlang(k, mu); 0 for k = 0."""
    if k < 0 or x < 0 or mu <= 0:
        raise ValueError("require k >= 0, x >= 0, mu > 0")
    return float(erlang_tail_table(k, x, mu)[k])


def positive_part_table(jmax, t, mu):
    """a_j(t) = E[(S_j + t)^+] for j = 0..jmax."""
    if t >= 0:
        return np.arange(jmax + 1) / mu + t
    tails = erlang_tail_table(jmax, -t, mu)
    out = np.empty(jmax + 1)
    out[0] = 0.0
    if jmax >= 1:
        out[1:] = np.cumsum(tails[1:]) / mu
    return out


def expected_positive_part(j, t, mu):
    """E[(S_j + t)^+]: residual service of j customers deferred past -t.

    For t >= 0 this is j/mu + t; for t < 0 it reduces to a sum of Erlang
    tails (checked against direct quadrature of the tail integral in the
    test suite).
    """
    if j < 0:
        raise ValueError("j must be >= 0")
    return float(positive_part_table(j, t, mu)[j])


def cost_at(t, state, w, params: ModelParams):
    """Expected cost of arriving at t against queue-length distribution
    `state` with expected waiting time w."""
    if t >= 0:
        return (params.alpha + params.beta2) * w + params.beta2 * t
    probs = np.asarray(state.probs if hasattr(state, "probs") else state)
    a = positive_part_table(len(probs) - 1, t, params.mu)
    tardiness = float(probs @ a)
    return -t * params.beta1 + params.alpha * w + params.beta2 * tardiness


def _atom_tables(p, params: ModelParams, cfg: SolverConfig):
    lp = params.lam * p
    # the batch-cost series needs a far smaller tail than the ODE state
    # truncation tolerates: late terms grow linearly, so a 1e-2 tail biases
    # the mixture by ~1%; sum to a 1e-9 floor and fold the remainder
    k = truncation_level(lp, min(cfg.nmax_tail_prob, 1e-9))
    pmf = poisson_pmf_table(lp, k)
    pmf[k] += max(0.0, 1.0 - float(pmf.sum()))
    return lp, k, pmf


def g1(t, p, params: ModelParams, cfg: SolverConfig):
    """Expected cost of arriving at t > -T1 when a Poisson(lam*p) batch
    arrived at the opening -T1 and nobody else arrives in between."""
    if not math.isfinite(params.t1):
        raise ValueError("g1 requires a finite opening time")
    if t <= -params.t1:
        raise ValueError("g1 requires t > -t1")
    lp, k, pmf = _atom_tables(p, params, cfg)
    # residual batch work still ahead of an arrival at t
    a_shift = positive_part_table(k, -(params.t1 + t), params.mu)
    ew = float(pmf @ a_shift)
    if t < 0:
        a_open = positive_part_table(k, -params.t1, params.mu)
        return -params.beta1 * t + params.alpha * ew + params.beta2 * float(pmf @ a_open)
    return params.beta2 * t + (params.alpha + params.beta2) * ew


def g2(p, params: ModelParams, cfg: SolverConfig):
    """Expected cost of joining the opening atom of mass p at -T1.

    The rank among the Poisson(lam*p) batch peers is uniform over the i+1
    members, consistent with the lam*p/2 expected queue ahead; the
    simulation oracle in the test suite pins this convention.
    """
    if not math.isfinite(params.t1):
        raise ValueError("g2 requires a finite opening time")
    lp, k, pmf = _atom_tables(p, params, cfg)
    a_open = positive_part_table(k, -params.t1, params.mu)
    prefix = np.cumsum(a_open)  # sum_{j<=i} a_j(-T1)
    ranks = np.arange(1, k + 2, dtype=float)
    tardiness = float(pmf @ (prefix / ranks))
    waiting = params.alpha * lp / (2.0 * params.mu)
    return params.beta1 * params.t1 + waiting + params.beta2 * tardiness
