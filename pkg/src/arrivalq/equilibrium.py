"""Symmetric Nash equilibrium solvers for the stochastic arrival game.

The unconstrained solver shoots over the earliest-arrival magnitude Te1:
from an empty system at -Te1 the state is marched forward extracting the
flat-cost density, and Te1 is bisected until the density hits zero exactly
when the arrival mass reaches one.  The constrained solver classifies the
opening/closing-time regime (pure atom, atom + gap + density, or atom-free
with a hard closing stop) and reuses the same march inside an outer
bisection on the atom mass.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import backend
from .costs import (
    g1,
    g2,
    poisson_pmf_table,
    positive_part_table,
    truncation_level,
)
from .errors import ConfigInvalid, InfeasibleGap, NoConvergence, TruncationBreach
from .kolmogorov import DensityCurve, auto_dt
from ._march_py import _f_neg
from .params import ModelParams, SolverConfig

CASE_UNCONSTRAINED = "UNCONSTRAINED"
CASE_PURE = "PURE"
CASE_ATOM_MIXED = "ATOM_MIXED"
CASE_ATOM_FREE_T2 = "ATOM_FREE_T2"


@dataclass
class EquilibriumSolution:
    strategy: DensityCurve
    equilibrium_cost: float
    te1: float
    te2: float
    atom_mass: float = 0.0
    gap_end: float | None = None
    case_label: str = CASE_UNCONSTRAINED
    diagnostics: dict = field(default_factory=dict)


def _require_stochastic(params):
    if not params.is_stochastic:
        raise ConfigInvalid("stochastic solver needs stochastic-tagged params")


def _nmax(params, cfg):
    return max(truncation_level(params.lam, cfg.nmax_tail_prob), 2)


def _horizon(params, te1_hint=0.0):
    lam, mu = params.lam, params.mu
    return 2.0 * (lam + 10.0 * math.sqrt(lam) + 5.0) / mu + te1_hint + 1.0


def _empty_state(nmax):
    p = np.zeros(nmax + 1)
    p[0] = 1.0
    return p


def _march(state0, t0, params, cfg, dt, t_hard, mass0, mass_target, record=False):
    res = backend.march(
        state0, t0, dt, t_hard,
        params.lam, params.mu, params.alpha, params.beta1, params.beta2,
        mass0=mass0, mass_target=mass_target, record_states=record,
    )
    pmax_peak = res[7]
    if pmax_peak > 10.0 * cfg.nmax_tail_prob:
        raise TruncationBreach(
            f"p_Nmax peaked at {pmax_peak:.3e} > 10*{cfg.nmax_tail_prob:.1e}; "
            "tighten nmax_tail_prob"
        )
    return res


def _dt_for_interval(params, cfg, span):
    dt = auto_dt(params, cfg)
    if span > 0:
        dt = min(dt, span / 50.0)
    return dt


def _solve_te1(params, cfg, t_hard, mass_target=1.0, state0=None):
    """Bisect the earliest-arrival magnitude until the mass and the
    density-zero (or hard stop) conditions meet simultaneously."""
    nmax = _nmax(params, cfg)
    p0 = _empty_state(nmax) if state0 is None else state0
    fluid_te1 = params.lam * params.beta2 / ((params.beta1 + params.beta2) * params.mu)

    def run(te1, record=False):
        dt = _dt_for_interval(params, cfg, te1)
        return _march(p0, -te1, params, cfg, dt,
                      min(t_hard, _horizon(params, te1)), 0.0, mass_target, record)

    hi = fluid_te1
    for _ in range(80):
        res = run(hi)
        if res[0] == backend.STATUS_MASS:
            break
        hi *= 2.0
    else:
        raise NoConvergence("no overshooting bracket for Te1")
    lo = 0.0
    res = None
    for it in range(cfg.max_bisect):
        mid = 0.5 * (lo + hi)
        res = run(mid)
        status, t_end, mass_end = res[0], res[1], res[2]
        done_mass = abs(mass_end - mass_target) <= 0.1 * cfg.epsilon
        at_hard = t_end >= t_hard - 2.0 * _dt_for_interval(params, cfg, mid)
        if done_mass and (status == backend.STATUS_FZERO or at_hard):
            return mid, res, it + 1
        if status == backend.STATUS_MASS:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-13 * max(1.0, hi):
            raise NoConvergence(
                f"Te1 bracket collapsed at {mid} with mass residual "
                f"{mass_end - mass_target:+.3e}"
            )
    raise NoConvergence(f"Te1 bisection did not converge in {cfg.max_bisect} iterations")


def _f_left_at(probs, t, params):
    return _f_neg(probs, t, params.lam, params.mu,
                  params.alpha, params.beta1, params.beta2)


def _curve_from_march(res, params, atoms=()):
    _, t_end, _, ts, fs, _, states, _, _ = res
    start = ts[0]
    # density jumps up from zero where the support (or the post-gap part) opens
    discontinuities = [(float(start), 0.0, float(fs[0]))]
    if start < 0.0 and t_end > 0.0:
        i0 = int(np.searchsorted(ts, 0.0))
        if i0 < len(ts) and ts[i0] == 0.0 and len(states):
            f_left = _f_left_at(states[i0], 0.0, params)
            discontinuities.append((0.0, float(f_left), float(fs[i0])))
    return DensityCurve(ts, np.maximum(fs, 0.0), list(atoms), discontinuities)


def solve_unconstrained(params: ModelParams, cfg: SolverConfig = SolverConfig()):
    """Equilibrium strategy when neither the opening nor the closing time
    binds; connected support, no atoms, cost beta1 * Te1."""
    _require_stochastic(params)
    te1, _, iters = _solve_te1(params, cfg, t_hard=math.inf)
    nmax = _nmax(params, cfg)
    dt = _dt_for_interval(params, cfg, te1)
    res = _march(_empty_state(nmax), -te1, params, cfg, dt,
                 _horizon(params, te1), 0.0, 1.0, record=True)
    te2 = res[1]
    if math.isfinite(params.t1) and te1 > params.t1 + cfg.epsilon:
        raise ConfigInvalid("opening time binds; use solve_constrained")
    if math.isfinite(params.t2) and te2 > params.t2 + cfg.epsilon:
        raise ConfigInvalid("closing time binds; use solve_constrained")
    curve = _curve_from_march(res, params)
    diag = {
        "bisect_iterations": iters,
        "mass_residual": float(res[2] - 1.0),
        "pmax_peak": res[7],
        "nmax": nmax,
        "dt": dt,
        "backend": backend.BACKEND,
        "grid_states": res[6],
        "grid_masses": res[5],
    }
    return EquilibriumSolution(
        strategy=curve,
        equilibrium_cost=params.beta1 * te1,
        te1=te1,
        te2=float(te2),
        case_label=CASE_UNCONSTRAINED,
        diagnostics=diag,
    )


def _tstar(p, params, cfg):
    """argmin over t >= 0 of g1(t, p)."""
    hi = (params.lam + 5.0 * math.sqrt(params.lam)) / params.mu + params.t1
    r = minimize_scalar(lambda t: g1(t, p, params, cfg), bounds=(0.0, hi),
                        method="bounded", options={"xatol": 1e-10})
    return float(r.x)


def _gap_start_root(p, params, cfg, tstar=None):
    """Smallest t > -T1 with g1(t, p) = g2(p); g1 is strictly decreasing up
    to its minimum, so the first crossing is the unique root before tstar."""
    g2v = g2(p, params, cfg)
    ts = _tstar(p, params, cfg) if tstar is None else tstar
    left = -params.t1 + max(1e-12, 1e-10 * params.t1)
    h_left = g1(left, p, params, cfg) - g2v
    if h_left <= 0.0:
        return left, g2v
    h_star = g1(ts, p, params, cfg) - g2v
    if h_star > 0.0:
        raise InfeasibleGap(
            f"g1 never drops to g2 for atom mass {p}; re-check the case split")
    root = brentq(lambda t: g1(t, p, params, cfg) - g2v, left, ts, xtol=1e-12)
    return float(root), g2v


def _atom_initial_state(p_atom, t_gap_end, params, cfg, nmax):
    """Queue-length distribution at the gap end: the Poisson(lam*p) batch
    from the opening minus services over the silent interval."""
    tau = t_gap_end + params.t1
    lam_atom = params.lam * p_atom
    kcap = truncation_level(lam_atom, min(cfg.nmax_tail_prob, 1e-12)) + 1
    batch = poisson_pmf_table(lam_atom, kcap)
    served = poisson_pmf_table(params.mu * tau, kcap)
    probs = np.zeros(nmax + 1)
    for k in range(1, min(nmax, kcap) + 1):
        # remaining k of n initial: exactly n-k service completions by tau
        probs[k] = float(batch[k:] @ served[: kcap - k + 1])
    spill = 0.0
    for k in range(nmax + 1, kcap + 1):
        spill += float(batch[k:] @ served[: kcap - k + 1])
    probs[nmax] += spill
    probs[0] = max(0.0, 1.0 - probs.sum())
    return probs


def classify_constrained(params: ModelParams, cfg: SolverConfig = SolverConfig()):
    """Case label for the constrained game (opening and/or closing time)."""
    label, _ = _classify_full(params, cfg)
    return label


def _classify_full(params, cfg):
    _require_stochastic(params)
    if not (math.isfinite(params.t1) or math.isfinite(params.t2)):
        raise ConfigInvalid("classification needs at least one finite bound")
    info = {}
    free = solve_unconstrained(params.unconstrained(), cfg)
    info["te1_unconstrained"] = free.te1
    info["te2_unconstrained"] = free.te2
    t1_binds = math.isfinite(params.t1) and params.t1 < free.te1
    t2_binds = math.isfinite(params.t2) and params.t2 < free.te2
    if not t1_binds and not t2_binds:
        return CASE_UNCONSTRAINED, info
    if not t1_binds and t2_binds:
        te1p, _, _ = _solve_te1(params, cfg, t_hard=params.t2)
        info["te1_hard_stop"] = te1p
        if te1p <= params.t1:
            return CASE_ATOM_FREE_T2, info
    # opening time binds (directly, or once the closing stop pushes
    # arrivals earlier): atom at -T1, pure or mixed
    tstar = _tstar(1.0, params, cfg)
    info["tstar"] = tstar
    g1_star = g1(tstar, 1.0, params, cfg)
    g2_full = g2(1.0, params, cfg)
    info["g1_at_tstar"] = g1_star
    info["g2_full_atom"] = g2_full
    if g2_full <= g1_star + cfg.epsilon * abs(g1_star):
        if abs(g2_full - g1_star) <= cfg.epsilon * abs(g1_star):
            info["tie_treated_as_pure"] = True
        return CASE_PURE, info
    t_prime, _ = _gap_start_root(1.0, params, cfg, tstar)
    info["t_prime_full_atom"] = t_prime
    if math.isfinite(params.t2) and params.t2 < t_prime:
        return CASE_PURE, info
    return CASE_ATOM_MIXED, info


def solve_constrained(params: ModelParams, cfg: SolverConfig = SolverConfig()):
    """Equilibrium under binding opening/closing times."""
    label, info = _classify_full(params, cfg)
    if label == CASE_UNCONSTRAINED:
        raise ConfigInvalid("constraints are not binding; use solve_unconstrained")
    if label == CASE_PURE:
        cost = g2(1.0, params, cfg)
        curve = DensityCurve(np.empty(0), np.empty(0), [(-params.t1, 1.0)], [])
        return EquilibriumSolution(
            strategy=curve, equilibrium_cost=cost, te1=params.t1, te2=-params.t1,
            atom_mass=1.0, case_label=CASE_PURE,
            diagnostics={"classify": info, "backend": backend.BACKEND},
        )
    if label == CASE_ATOM_FREE_T2:
        te1p, _, iters = _solve_te1(params, cfg, t_hard=params.t2)
        nmax = _nmax(params, cfg)
        dt = _dt_for_interval(params, cfg, te1p)
        res = _march(_empty_state(nmax), -te1p, params, cfg, dt,
                     params.t2, 0.0, 1.0, record=True)
        curve = _curve_from_march(res, params)
        diag = {
            "classify": info,
            "bisect_iterations": iters,
            "mass_residual": float(res[2] - 1.0),
            "pmax_peak": res[7],
            "nmax": nmax,
            "dt": dt,
            "backend": backend.BACKEND,
            "grid_states": res[6],
            "grid_masses": res[5],
        }
        return EquilibriumSolution(
            strategy=curve, equilibrium_cost=params.beta1 * te1p,
            te1=te1p, te2=float(res[1]), case_label=CASE_ATOM_FREE_T2,
            diagnostics=diag,
        )
    return _solve_atom_mixed(params, cfg, info)


def _solve_atom_mixed(params, cfg, info):
    nmax = _nmax(params, cfg)
    t_hard = params.t2 if math.isfinite(params.t2) else _horizon(params, params.t1)

    def run(p_atom, record=False):
        try:
            t_gap, g2v = _gap_start_root(p_atom, params, cfg)
        except InfeasibleGap:
            # no arrival time beats joining an atom of this size, so the
            # equilibrium atom must be larger
            return None
        state0 = _atom_initial_state(p_atom, t_gap, params, cfg, nmax)
        span = max(t_hard - t_gap, params.t1)
        dt = _dt_for_interval(params, cfg, min(span, 10.0 * params.t1 + 1.0))
        res = _march(state0, t_gap, params, cfg, dt, t_hard,
                     0.0, 1.0 - p_atom, record)
        return t_gap, g2v, dt, res

    lo, hi = 1e-9, 1.0 - 1e-9
    final = None
    for it in range(cfg.max_bisect):
        mid = 0.5 * (lo + hi)
        out = run(mid)
        if out is None:
            lo = mid
            if hi - lo < 1e-14:
                raise NoConvergence("atom-mass bracket collapsed with no gap root")
            continue
        t_gap, g2v, dt, res = out
        status, t_end, mass_end = res[0], res[1], res[2]
        target = 1.0 - mid
        done_mass = abs(mass_end - target) <= 0.1 * cfg.epsilon
        at_hard = t_end >= t_hard - 2.0 * dt
        if done_mass and (status == backend.STATUS_FZERO or at_hard):
            final = (mid, t_gap, g2v, dt)
            break
        if status == backend.STATUS_MASS:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-14:
            raise NoConvergence(
                f"atom-mass bracket collapsed at {mid} with residual "
                f"{mass_end - target:+.3e}"
            )
    if final is None:
        raise NoConvergence(f"atom bisection did not converge in {cfg.max_bisect} iterations")

    p_atom, t_gap, g2v, dt = final
    state0 = _atom_initial_state(p_atom, t_gap, params, cfg, nmax)
    res = _march(state0, t_gap, params, cfg, dt, t_hard, 0.0, 1.0 - p_atom, record=True)
    if res[4][0] < -cfg.epsilon:
        raise InfeasibleGap(f"density {res[4][0]:.3e} < 0 at the gap end")
    curve = _curve_from_march(res, params, atoms=[(-params.t1, p_atom)])
    resid = g1(t_gap, p_atom, params, cfg) - g2v if t_gap > -params.t1 + 1e-9 else 0.0
    diag = {
        "classify": info,
        "bisect_iterations": it + 1,
        "mass_residual": float(res[2] - (1.0 - p_atom)),
        "indifference_residual": float(resid),
        "pmax_peak": res[7],
        "nmax": nmax,
        "dt": dt,
        "backend": backend.BACKEND,
        "grid_states": res[6],
        "grid_masses": res[5],
    }
    return EquilibriumSolution(
        strategy=curve, equilibrium_cost=g2v, te1=params.t1, te2=float(res[1]),
        atom_mass=p_atom, gap_end=t_gap, case_label=CASE_ATOM_MIXED,
        diagnostics=diag,
    )


def solve(params: ModelParams, cfg: SolverConfig = SolverConfig()):
    """Dispatch on whether the arrival-window bounds bind."""
    _require_stochastic(params)
    if not (math.isfinite(params.t1) or math.isfinite(params.t2)):
        return solve_unconstrained(params, cfg)
    label, _ = _classify_full(params, cfg)
    if label == CASE_UNCONSTRAINED:
        return solve_unconstrained(params.unconstrained(), cfg)
    return solve_constrained(params, cfg)


def cost_along_path(solution: EquilibriumSolution, params: ModelParams, stride=None):
    """Independently recompute the expected arrival cost at grid nodes from
    the stored state trajectory (the solver's self-audit)."""
    diag = solution.diagnostics
    states = diag.get("grid_states")
    ts = solution.strategy.grid
    if states is None or not len(states):
        raise ValueError("solution carries no state trajectory")
    n = len(ts)
    if stride is None:
        stride = max(1, n // 2000)
    idx = np.arange(0, len(states), stride)
    out_t = np.empty(len(idx))
    out_c = np.empty(len(idx))
    ks = np.arange(states.shape[1])
    for i, j in enumerate(idx):
        t = ts[j]
        p = states[j]
        w = float(ks @ p) / params.mu
        if t < 0:
            a = positive_part_table(states.shape[1] - 1, t, params.mu)
            c = -t * params.beta1 + params.alpha * w + params.beta2 * float(p @ a)
        else:
            c = (params.alpha + params.beta2) * w + params.beta2 * t
        out_t[i] = t
        out_c[i] = c
    return out_t, out_c
