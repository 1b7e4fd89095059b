"""Closed-form fluid solver: equilibrium and socially optimal arrival
strategies, their social costs, and the price of anarchy, for the
unconstrained game and all constrained regimes.

Masses are fractions of the population (segments carry density per unit
time, atoms carry probability mass); social costs are volume-weighted
totals.  Every closed form is checked at construction time against the
defining indifference + mass-balance equations; on disagreement the
numerical solution of those equations is used instead and the solution is
flagged in `thresholds['fallback']`.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, fsolve

from .errors import ConfigInvalid, InvalidRegime
from .params import ModelParams

UNCONSTRAINED = "UNCONSTRAINED"
T1_PURE = "T1_PURE"
T1_CASE2 = "T1_CASE2"
T1_CASE3 = "T1_CASE3"
T1_CASE4 = "T1_CASE4"
T2_ONLY = "T2_ONLY"
JOINT_CASE1 = "JOINT_CASE1"
JOINT_CASE2 = "JOINT_CASE2"
JOINT_CASE3 = "JOINT_CASE3"
JOINT_CASE4 = "JOINT_CASE4"
OPT_UNCONSTRAINED = "OPT_UNCONSTRAINED"
OPT_T1 = "OPT_T1"
OPT_T2 = "OPT_T2"
OPT_JOINT_CASE1 = "OPT_JOINT_CASE1"
OPT_JOINT_CASE2 = "OPT_JOINT_CASE2"

_REL = 1e-6  # closed-form vs defining-system tolerance
_TIE = 1e-12  # guard band for threshold comparisons


@dataclass
class FluidSolution:
    segments: list  # (start, end, density) with piecewise-constant density
    atoms: list  # (time, mass fraction)
    social_cost: float
    case_label: str
    drop_cost: float = 0.0
    thresholds: dict = field(default_factory=dict)
    breakpoints: dict = field(default_factory=dict)
    atom_sizes: dict = field(default_factory=dict)

    def total_mass(self):
        seg = sum((e - s) * f for s, e, f in self.segments)
        return seg + sum(m for _, m in self.atoms)

    @property
    def support(self):
        times = [t for t, _ in self.atoms]
        times += [s for s, _, _ in self.segments] + [e for _, e, _ in self.segments]
        return (min(times), max(times))


def _require_fluid(params):
    if not params.is_fluid:
        raise ConfigInvalid("fluid solver needs fluid-tagged params")


def _te1(p):
    return p.beta2 * p.lam / ((p.beta1 + p.beta2) * p.mu)


def _te2(p):
    return p.beta1 * p.lam / ((p.beta1 + p.beta2) * p.mu)


def _lb_t2(p, t2):
    """Lower support bound when only the closing time binds; also the T1
    below which an opening atom forms."""
    return ((p.alpha + p.beta2) * p.lam - p.alpha * t2 * p.mu) / (
        (p.alpha + p.beta1 + p.beta2) * p.mu
    )


def _atom_cost(p, mass, t1):
    """Average cost of a drop inside an atom of the given mass at -t1."""
    vol = mass * p.lam
    c = p.beta1 * t1 + p.alpha * vol / (2.0 * p.mu)
    if vol / p.mu > t1:
        c += p.beta2 * (vol - t1 * p.mu) ** 2 / (2.0 * p.mu * vol)
    return c


def density_cost_at(params, segments, atoms, t):
    """Cost of a drop arriving at a density point t of the strategy."""
    p = params
    start = min([a for a, _ in atoms] + [s for s, _, _ in segments])
    vol = sum(m for a, m in atoms if a <= t) * p.lam
    for s, e, f in segments:
        vol += f * p.lam * max(0.0, min(t, e) - s)
    work = vol - p.mu * (t - start)
    wait = max(work, 0.0) / p.mu
    return p.beta1 * max(-t, 0.0) + p.alpha * wait + p.beta2 * max(t + wait, 0.0)


def _check_equal_costs(params, sol, points, scale):
    costs = [density_cost_at(params, sol.segments, sol.atoms, t) for t in points]
    for t0, _ in sol.atoms:
        if t0 <= 0:  # opening atom; closing-time atoms appear only in optima
            costs.append(_atom_cost(params, dict(sol.atoms)[t0], -t0))
    dev = max(abs(c - sol.drop_cost) for c in costs)
    if dev > 1e-9 * max(1.0, abs(scale)):
        raise InvalidRegime(
            f"{sol.case_label}: indifference violated by {dev:.3e} at {points}")


def _check_mass(sol):
    if abs(sol.total_mass() - 1.0) > 1e-10:
        raise InvalidRegime(f"{sol.case_label}: mass {sol.total_mass()} != 1")


# ---------------------------------------------------------------------------
# defining systems for the constrained closed forms


def _t1_case2_residuals(p, t1c, x):
    p1, t1 = x
    atom = _atom_cost(p, p1, t1c)
    dev = p.beta2 * (p1 * p.lam / p.mu - t1c) + p.alpha * (p1 * p.lam / p.mu - t1c - t1)
    mass = p1 + (p.alpha / (p.alpha + p.beta2)) * (p.mu / p.lam) * (
        p.lam / p.mu - t1c - t1) - 1.0
    return [atom - dev, mass]


def _t1_case3_residuals(p, t1c, x):
    p1, t2 = x
    atom = _atom_cost(p, p1, t1c)
    dev = (-p.beta1 * t2 + p.alpha * (p1 * p.lam / p.mu - t1c - t2)
           + p.beta2 * (p1 * p.lam / p.mu - t1c))
    mass = (p1 + ((p.alpha + p.beta1) / (p.alpha + p.beta2)) * (p.mu / p.lam) * (-t2)
            + (p.alpha / (p.alpha + p.beta2)) * (1.0 - t1c * p.mu / p.lam) - 1.0)
    return [atom - dev, mass]


def _t1_case4_residuals(p, t1c, x):
    p2, t3, t4 = x
    atom = p.beta1 * t1c + p.alpha * p2 * p.lam / (2.0 * p.mu)
    at_t3 = -p.beta1 * t3 + p.alpha * (p2 * p.lam / p.mu - t1c - t3)
    at_t4 = -(p.beta1 + p.alpha) * t4
    mass = (p2 + (t4 - t3) * ((p.alpha + p.beta1) / p.alpha) * (p.mu / p.lam)
            + ((p.alpha + p.beta1) / (p.alpha + p.beta2)) * (p.mu / p.lam) * (-t4)
            + (p.alpha / (p.alpha + p.beta2)) * (1.0 - t1c * p.mu / p.lam) - 1.0)
    return [atom - at_t3, at_t3 - at_t4, mass]


def _joint_case2_residuals(p, t1c, t2c, x):
    p1, t1 = x
    atom = _atom_cost(p, p1, t1c)
    dev = p.beta2 * (p1 * p.lam / p.mu - t1c) + p.alpha * (p1 * p.lam / p.mu - t1c - t1)
    mass = p1 + (p.alpha / (p.alpha + p.beta2)) * (p.mu / p.lam) * (t2c - t1) - 1.0
    return [atom - dev, mass]


def _joint_case3_residuals(p, t1c, t2c, x):
    p1, t2 = x
    atom = _atom_cost(p, p1, t1c)
    dev = (-p.beta1 * t2 + p.alpha * (p1 * p.lam / p.mu - t1c - t2)
           + p.beta2 * (p1 * p.lam / p.mu - t1c))
    mass = (p1 + ((p.alpha + p.beta1) / (p.alpha + p.beta2)) * (p.mu / p.lam) * (-t2)
            + (p.alpha / (p.alpha + p.beta2)) * (p.mu / p.lam) * t2c - 1.0)
    return [atom - dev, mass]


def _joint_case4_residuals(p, t1c, t2c, x):
    p2, t3, t4 = x
    atom = p.beta1 * t1c + p.alpha * p2 * p.lam / (2.0 * p.mu)
    at_t3 = -p.beta1 * t3 + p.alpha * (p2 * p.lam / p.mu - t1c - t3)
    at_t4 = -(p.beta1 + p.alpha) * t4
    mass = (p2 + (t4 - t3) * ((p.alpha + p.beta1) / p.alpha) * (p.mu / p.lam)
            + ((p.alpha + p.beta1) / (p.alpha + p.beta2)) * (p.mu / p.lam) * (-t4)
            + (p.alpha / (p.alpha + p.beta2)) * (p.mu / p.lam) * t2c - 1.0)
    return [atom - at_t3, at_t3 - at_t4, mass]


def _settle(closed, residual_fn, label):
    """Keep the closed-form values if they satisfy the defining system;
    otherwise fall back to the numerical solution."""
    x0 = np.asarray(closed, dtype=float)
    res = np.asarray(residual_fn(x0), dtype=float)
    scale = max(1.0, float(np.max(np.abs(x0))))
    if np.all(np.isfinite(x0)) and float(np.max(np.abs(res))) <= 1e-8 * scale:
        return x0, False
    sol, info, ier, msg = fsolve(residual_fn, np.nan_to_num(x0, nan=0.5),
                                 full_output=True, xtol=1e-12)
    if ier != 1 or float(np.max(np.abs(residual_fn(sol)))) > 1e-8 * scale:
        raise InvalidRegime(f"{label}: defining system unsolved ({msg})")
    return np.asarray(sol, dtype=float), True


# ---------------------------------------------------------------------------
# closed forms (corrected where the printed expressions fail their own
# defining equations; see _settle fallbacks)


def _closed_t1_case23(p, t1c):
    L, mu, a, b1, b2 = p.lam, p.mu, p.alpha, p.beta1, p.beta2
    rad_p = -4.0 * t1c**2 * b2 * (a + b2) * L**2 * mu**2 + (
        2.0 * b2 * L**2 - 2.0 * t1c * b1 * L * mu) ** 2
    p1 = ((b2 * L**2 - t1c * b1 * L * mu + 0.5 * math.sqrt(max(rad_p, 0.0)))
          / ((a + b2) * L**2))
    rad_t = L**2 * (b2**2 * L**2 - 2.0 * t1c * b1 * b2 * L * mu
                    + t1c**2 * (b1**2 - b2 * (a + b2)) * mu**2)
    sq = math.sqrt(max(rad_t, 0.0))
    t1 = (-t1c * (a + b1) * L * mu + sq) / (a * L * mu)
    t2 = -t1c + sq / ((a + b1) * L * mu)
    return p1, t1, t2


def _closed_t1_case4(p, t1c):
    L, mu, a, b1, b2 = p.lam, p.mu, p.alpha, p.beta1, p.beta2
    p2 = 2.0 * (b2 * L - t1c * mu * (b1 + b2)) / (a * L)
    t3 = (b2 * L - t1c * (a + 2.0 * b1 + b2) * mu) / ((a + b1) * mu)
    t4 = b2 * (t1c * mu - L) / ((a + b1) * mu)
    return p2, t3, t4


def _closed_joint_case23(p, t1c, t2c):
    L, mu, a, b1, b2 = p.lam, p.mu, p.alpha, p.beta1, p.beta2
    q = (t2c * a + t1c * (a + b1)) * mu
    rad = L**2 * (-t1c**2 * b2 * (a + b2) * mu**2 + ((a + b2) * L - q) ** 2)
    sq = math.sqrt(max(rad, 0.0))
    p1 = ((a + b2) * L**2 - q * L + sq) / ((a + b2) * L**2)
    t1 = (-t1c * (a + b1) * L * mu + sq) / (a * L * mu)
    t2 = -t1c + sq / ((a + b1) * L * mu)
    return p1, t1, t2


def _closed_joint_case4(p, t1c, t2c):
    L, mu, a, b1, b2 = p.lam, p.mu, p.alpha, p.beta1, p.beta2
    p2 = 2.0 * ((a + b2) * L - (t2c * a + t1c * (a + b1 + b2)) * mu) / (a * L)
    t3 = (L * (a + b2) - (t2c * a + t1c * (2.0 * (a + b1) + b2)) * mu) / ((a + b1) * mu)
    t4 = (-(a + b2) * L + (t2c * a + t1c * (a + b2)) * mu) / ((a + b1) * mu)
    return p2, t3, t4


# ---------------------------------------------------------------------------
# thresholds


def _threshold_a1(p, t2c=None):
    """Largest T1 at which the full atom beats the best deviation (pure
    region boundary); None when the pure region is empty."""
    L, mu, a, b1, b2 = p.lam, p.mu, p.alpha, p.beta1, p.beta2

    def q(t1c):
        dev = b2 * (L / mu - t1c)
        if t2c is not None:
            dev += a * (L / mu - t1c - t2c)
        return _atom_cost(p, 1.0, t1c) - dev

    upper = L / mu if t2c is None else L / mu - t2c
    if q(1e-14) >= 0.0:
        return None
    # q is increasing in T1, so the sign change is unique
    root = brentq(q, 1e-14, upper, xtol=1e-14)
    if t2c is None:
        disc = b1 * b1 - a * b2 + b2 * b2
        if disc >= 0.0:
            closed = (-b1 + math.sqrt(disc)) * L / (b2 * mu)
            if abs(closed - root) > _REL * max(1.0, abs(root)):
                return root
    return root


def _threshold_a2(p, t2c=None):
    """T1 at which the post-gap density boundary crosses zero (case 2/3)."""
    L, mu, a, b2 = p.lam, p.mu, p.alpha, p.beta2
    t2_eff = (L / mu - 0.0) if t2c is None else t2c

    def gap_at_zero(t1c):
        window = (L / mu - t1c) if t2c is None else t2c
        p_star = 1.0 - (a / (a + b2)) * (mu / L) * window
        atom = _atom_cost(p, p_star, t1c)
        dev = (p.beta2 * (p_star * L / mu - t1c)
               + a * (p_star * L / mu - t1c - 0.0))
        return atom - dev

    upper = (L / mu if t2c is None else L / mu - t2c) - 1e-14
    lo = 1e-14
    if gap_at_zero(lo) >= 0.0 or gap_at_zero(upper) <= 0.0:
        # scan for a bracket; the crossing is unique in the atom regime
        grid = np.linspace(lo, upper, 200)
        vals = [gap_at_zero(t) for t in grid]
        sign = np.sign(vals)
        idx = np.where(np.diff(sign) != 0)[0]
        if len(idx) == 0:
            return None
        lo, upper = grid[idx[0]], grid[idx[0] + 1]
    return brentq(gap_at_zero, lo, upper, xtol=1e-14)


def _threshold_a3(p, t2c=None):
    L, mu, a, b1, b2 = p.lam, p.mu, p.alpha, p.beta1, p.beta2
    if t2c is None:
        return 2.0 * b2 * L / ((a + 2.0 * b1 + 2.0 * b2) * mu)
    return (2.0 * (a + b2) * L - 2.0 * t2c * a * mu) / ((3.0 * a + 2.0 * (b1 + b2)) * mu)


# ---------------------------------------------------------------------------
# equilibrium builders


def _build_unconstrained(p):
    te1, te2 = _te1(p), _te2(p)
    tb = -p.beta1 / (p.alpha + p.beta1) * te1
    f1 = (p.alpha + p.beta1) / p.alpha * p.mu / p.lam
    f2 = (p.alpha + p.beta1) / (p.alpha + p.beta2) * p.mu / p.lam
    f3 = p.alpha / (p.alpha + p.beta2) * p.mu / p.lam
    drop = p.beta1 * te1
    social = p.beta1 * p.beta2 * p.lam**2 / ((p.beta1 + p.beta2) * p.mu)
    sol = FluidSolution(
        segments=[(-te1, tb, f1), (tb, 0.0, f2), (0.0, te2, f3)],
        atoms=[], social_cost=social, case_label=UNCONSTRAINED, drop_cost=drop,
        breakpoints={"te1": te1, "tb": tb, "te2": te2},
    )
    _check_mass(sol)
    _check_equal_costs(p, sol, [-te1 + 1e-9, tb, 1e-12, te2 - 1e-9], drop)
    if abs(social - p.lam * drop) > 1e-9 * max(1.0, social):
        raise InvalidRegime("unconstrained: social cost != volume * drop cost")
    return sol


def _build_t1_regime(p):
    t1c = p.t1
    a1 = _threshold_a1(p)
    a2 = _threshold_a2(p)
    a3 = _threshold_a3(p)
    a4 = _te1(p)
    thr = {"a1": a1, "a2": a2, "a3": a3, "a4": a4}
    L, mu, a, b1, b2 = p.lam, p.mu, p.alpha, p.beta1, p.beta2
    f2 = (a + b1) / (a + b2) * mu / L
    f3 = a / (a + b2) * mu / L
    f1d = (a + b1) / a * mu / L
    end = L / mu - t1c
    social_mixed = L * b2 * end

    if a1 is not None and t1c <= a1 * (1.0 + _TIE):
        drop = _atom_cost(p, 1.0, t1c)
        sol = FluidSolution([], [(-t1c, 1.0)], L * drop, T1_PURE, drop, thr)
        return sol
    if a2 is not None and t1c <= a2 * (1.0 + _TIE):
        closed = _closed_t1_case23(p, t1c)
        (p1, t1), fb = _settle(closed[:2], lambda x: _t1_case2_residuals(p, t1c, x),
                               T1_CASE2)
        thr["fallback"] = fb
        sol = FluidSolution(
            [(t1, end, f3)], [(-t1c, p1)], social_mixed, T1_CASE2,
            _atom_cost(p, p1, t1c), thr, {"t1": t1}, {"p1": p1})
    elif t1c <= a3 * (1.0 + _TIE):
        closed = _closed_t1_case23(p, t1c)
        (p1, t2), fb = _settle((closed[0], closed[2]),
                               lambda x: _t1_case3_residuals(p, t1c, x), T1_CASE3)
        thr["fallback"] = fb
        sol = FluidSolution(
            [(t2, 0.0, f2), (0.0, end, f3)], [(-t1c, p1)], social_mixed, T1_CASE3,
            _atom_cost(p, p1, t1c), thr, {"t2": t2}, {"p1": p1})
    else:
        closed = _closed_t1_case4(p, t1c)
        (p2, t3, t4), fb = _settle(closed, lambda x: _t1_case4_residuals(p, t1c, x),
                                   T1_CASE4)
        thr["fallback"] = fb
        sol = FluidSolution(
            [(t3, t4, f1d), (t4, 0.0, f2), (0.0, end, f3)], [(-t1c, p2)],
            social_mixed, T1_CASE4, _atom_cost(p, p2, t1c), thr,
            {"t3": t3, "t4": t4}, {"p2": p2})
    _check_mass(sol)
    inner = [s + 1e-9 for s, _, _ in sol.segments] + [max(e - 1e-9, s) for s, e, _ in sol.segments]
    _check_equal_costs(p, sol, inner, sol.drop_cost)
    return sol


def _build_t2_only(p):
    t2c = p.t2
    lb = _lb_t2(p, t2c)
    m = -(p.beta1 / (p.alpha + p.beta1)) * lb
    L, mu, a, b1, b2 = p.lam, p.mu, p.alpha, p.beta1, p.beta2
    f1 = (a + b1) / a * mu / L
    f2 = (a + b1) / (a + b2) * mu / L
    f3 = a / (a + b2) * mu / L
    drop = b1 * lb
    social = L * drop
    sol = FluidSolution(
        [(-lb, m, f1), (m, 0.0, f2), (0.0, t2c, f3)], [], social, T2_ONLY, drop,
        {"lb": lb}, {"tb": m},
    )
    _check_mass(sol)
    _check_equal_costs(p, sol, [-lb + 1e-9, m, 1e-12, t2c - 1e-9], drop)
    return sol


def _build_joint(p):
    t1c, t2c = p.t1, p.t2
    a1 = _threshold_a1(p, t2c)
    a2 = _threshold_a2(p, t2c)
    a3 = _threshold_a3(p, t2c)
    a4 = p.lam / p.mu - t2c
    thr = {"a1p": a1, "a2p": a2, "a3p": a3, "a4p": a4, "lb_t2": _lb_t2(p, t2c)}
    L, mu, a, b1, b2 = p.lam, p.mu, p.alpha, p.beta1, p.beta2
    f1d = (a + b1) / a * mu / L
    f2 = (a + b1) / (a + b2) * mu / L
    f3 = a / (a + b2) * mu / L
    social_mixed = L * ((a + b2) * (L / mu - t1c) - a * t2c)

    if a1 is not None and t1c <= a1 * (1.0 + _TIE):
        drop = _atom_cost(p, 1.0, t1c)
        return FluidSolution([], [(-t1c, 1.0)], L * drop, JOINT_CASE1, drop, thr)
    if a2 is not None and t1c <= a2 * (1.0 + _TIE):
        closed = _closed_joint_case23(p, t1c, t2c)
        (p1, t1), fb = _settle(closed[:2],
                               lambda x: _joint_case2_residuals(p, t1c, t2c, x),
                               JOINT_CASE2)
        thr["fallback"] = fb
        sol = FluidSolution(
            [(t1, t2c, f3)], [(-t1c, p1)], social_mixed, JOINT_CASE2,
            _atom_cost(p, p1, t1c), thr, {"t1p": t1}, {"p1p": p1})
    elif t1c <= a3 * (1.0 + _TIE):
        closed = _closed_joint_case23(p, t1c, t2c)
        (p1, t2), fb = _settle((closed[0], closed[2]),
                               lambda x: _joint_case3_residuals(p, t1c, t2c, x),
                               JOINT_CASE3)
        thr["fallback"] = fb
        sol = FluidSolution(
            [(t2, 0.0, f2), (0.0, t2c, f3)], [(-t1c, p1)], social_mixed, JOINT_CASE3,
            _atom_cost(p, p1, t1c), thr, {"t2p": t2}, {"p1p": p1})
    else:
        closed = _closed_joint_case4(p, t1c, t2c)
        (p2, t3, t4), fb = _settle(closed,
                                   lambda x: _joint_case4_residuals(p, t1c, t2c, x),
                                   JOINT_CASE4)
        thr["fallback"] = fb
        sol = FluidSolution(
            [(t3, t4, f1d), (t4, 0.0, f2), (0.0, t2c, f3)], [(-t1c, p2)],
            social_mixed, JOINT_CASE4, _atom_cost(p, p2, t1c), thr,
            {"t3p": t3, "t4p": t4}, {"p2p": p2})
    _check_mass(sol)
    inner = [s + 1e-9 for s, _, _ in sol.segments] + [max(e - 1e-9, s) for s, e, _ in sol.segments]
    _check_equal_costs(p, sol, inner, sol.drop_cost)
    return sol


def fluid_equilibrium(params: ModelParams):
    """Equilibrium arrival strategy of the fluid game."""
    _require_fluid(params)
    p = params
    te1, te2 = _te1(p), _te2(p)
    if p.t2 >= te2 * (1.0 - _TIE):
        if p.t1 >= te1 * (1.0 - _TIE):
            return _build_unconstrained(p)
        if p.t1 + p.t2 >= p.lam / p.mu:
            return _build_t1_regime(p)
        return _build_joint(p)
    if p.t1 >= _lb_t2(p, p.t2) * (1.0 - _TIE):
        return _build_t2_only(p)
    return _build_joint(p)


# ---------------------------------------------------------------------------
# social optima


def _build_opt_unconstrained(p):
    te1, te2 = _te1(p), _te2(p)
    social = p.beta1 * p.beta2 * p.lam**2 / (2.0 * (p.beta1 + p.beta2) * p.mu)
    sol = FluidSolution([(-te1, te2, p.mu / p.lam)], [], social, OPT_UNCONSTRAINED,
                        breakpoints={"lb": te1, "ub": te2})
    _check_mass(sol)
    return sol


def _build_opt_t1(p):
    end = p.lam / p.mu - p.t1
    social = 0.5 * p.mu * (p.beta1 * p.t1**2 + p.beta2 * (p.t1 - p.lam / p.mu) ** 2)
    sol = FluidSolution([(-p.t1, end, p.mu / p.lam)], [], social, OPT_T1,
                        breakpoints={"lb": p.t1, "ub": end})
    _check_mass(sol)
    return sol


def _build_opt_t2(p):
    L, mu, a, b1, b2 = p.lam, p.mu, p.alpha, p.beta1, p.beta2
    t2c = p.t2
    lb = _lb_t2(p, t2c)
    tail = (L - (lb + t2c) * mu) / L  # fraction parked at the closing time
    social = (b1 * (a + b2) * L**2 - 2.0 * t2c * a * b1 * L * mu
              + t2c**2 * a * (b1 + b2) * mu**2) / (2.0 * (a + b1 + b2) * mu)
    sol = FluidSolution([(-lb, t2c, mu / L)], [(t2c, tail)], social, OPT_T2,
                        breakpoints={"lb": lb, "ub": t2c}, atom_sizes={"tail": tail})
    _check_mass(sol)
    # the stated lower bound must minimize the full objective
    vol = L - (lb + t2c) * mu
    direct = (0.5 * b1 * mu * lb**2 + 0.5 * b2 * mu * t2c**2
              + vol**2 * (a + b2) / (2.0 * mu) + b2 * t2c * vol)
    if abs(direct - social) > 1e-9 * max(1.0, social):
        raise InvalidRegime(f"t2 optimum cost mismatch: {direct} vs {social}")
    return sol


def _build_opt_joint(p):
    L, mu, a, b1, b2 = p.lam, p.mu, p.alpha, p.beta1, p.beta2
    t1c, t2c = p.t1, p.t2
    if t1c > _lb_t2(p, t2c) * (1.0 + _TIE):
        sol = _build_opt_t2(p)
        return FluidSolution(sol.segments, sol.atoms, sol.social_cost,
                             OPT_JOINT_CASE2, sol.drop_cost, sol.thresholds,
                             sol.breakpoints, sol.atom_sizes)
    vol = L - (t1c + t2c) * mu
    tail = vol / L
    social = (0.5 * b1 * mu * t1c**2 + 0.5 * b2 * mu * t2c**2
              + vol**2 * (a + b2) / (2.0 * mu) + b2 * t2c * vol)
    sol = FluidSolution([(-t1c, t2c, mu / L)], [(t2c, tail)], social, OPT_JOINT_CASE1,
                        breakpoints={"lb": t1c, "ub": t2c}, atom_sizes={"tail": tail})
    _check_mass(sol)
    return sol


def fluid_social_optimum(params: ModelParams):
    """Socially optimal strategy: arrive at the service rate, with the
    residual mass parked at the closing time when the window is short."""
    _require_fluid(params)
    p = params
    te1, te2 = _te1(p), _te2(p)
    if p.t1 >= te1 * (1.0 - _TIE) and p.t2 >= te2 * (1.0 - _TIE):
        return _build_opt_unconstrained(p)
    if p.t2 >= te2 * (1.0 - _TIE) and p.t1 + p.t2 >= p.lam / p.mu:
        return _build_opt_t1(p)
    if p.t2 < te2 * (1.0 - _TIE) and p.t1 >= _lb_t2(p, p.t2) * (1.0 - _TIE):
        return _build_opt_t2(p)
    return _build_opt_joint(p)


# ---------------------------------------------------------------------------
# price of anarchy


def price_of_anarchy(params: ModelParams):
    """Equilibrium-to-optimum social cost ratio; checked against the
    published explicit ratios in the single-constraint regimes."""
    _require_fluid(params)
    eq = fluid_equilibrium(params)
    opt = fluid_social_optimum(params)
    ratio = eq.social_cost / opt.social_cost
    p = params
    L, mu, a, b1, b2 = p.lam, p.mu, p.alpha, p.beta1, p.beta2
    explicit = None
    if eq.case_label == UNCONSTRAINED:
        explicit = 2.0
    elif eq.case_label == T1_PURE and opt.case_label == OPT_T1:
        explicit = (a * L**2 + 2.0 * p.t1 * b1 * L * mu + b2 * (L - p.t1 * mu) ** 2) / (
            p.t1**2 * b1 * mu**2 + b2 * (L - p.t1 * mu) ** 2)
    elif eq.case_label in (T1_CASE2, T1_CASE3, T1_CASE4) and opt.case_label == OPT_T1:
        explicit = (2.0 * b2 * L * (L - p.t1 * mu)) / (
            p.t1**2 * b1 * mu**2 + b2 * (L - p.t1 * mu) ** 2)
    elif eq.case_label == T2_ONLY and opt.case_label == OPT_T2:
        explicit = (2.0 * b1 * L * ((a + b2) * L - p.t2 * a * mu)) / (
            b1 * (a + b2) * L**2 - 2.0 * p.t2 * a * b1 * L * mu
            + p.t2**2 * a * (b1 + b2) * mu**2)
    if explicit is not None and abs(ratio - explicit) > 1e-9 * max(1.0, ratio):
        raise InvalidRegime(
            f"PoA mismatch in {eq.case_label}: ratio {ratio} vs explicit {explicit}")
    return ratio
