"""Fluid solver: frozen benchmark instances, regime dispatch, case-boundary
continuity, and closed forms against an independent root solve of each
regime's indifference + mass-balance equations."""

import numpy as np
import pytest
from scipy.optimize import fsolve

from arrivalq.errors import ConfigInvalid
from arrivalq.fluid import (
    JOINT_CASE2,
    JOINT_CASE3,
    JOINT_CASE4,
    OPT_JOINT_CASE1,
    OPT_T1,
    OPT_T2,
    T1_CASE2,
    T1_CASE3,
    T1_CASE4,
    T1_PURE,
    T2_ONLY,
    UNCONSTRAINED,
    FluidSolution,
    density_cost_at,
    fluid_equilibrium,
    fluid_social_optimum,
    price_of_anarchy,
)
from arrivalq.params import ModelParams


def cdf_on(sol: FluidSolution, ts):
    out = np.zeros(len(ts))
    for i, t in enumerate(ts):
        c = sum(m for a, m in sol.atoms if a <= t)
        for s, e, f in sol.segments:
            c += f * max(0.0, min(t, e) - s)
        out[i] = c
    return out


def solutions_close(a, b, lo, hi, tol=1e-6):
    ts = np.linspace(lo, hi, 400)
    return float(np.max(np.abs(cdf_on(a, ts) - cdf_on(b, ts)))) <= tol


class TestUnconstrained:
    def test_reference_instance(self):
        p = ModelParams.fluid(10, 1, 1, 1, 1)
        eq = fluid_equilibrium(p)
        assert eq.case_label == UNCONSTRAINED
        expected = [(-5.0, -2.5, 0.2), (-2.5, 0.0, 0.1), (0.0, 5.0, 0.05)]
        for (s, e, f), (es, ee, ef) in zip(eq.segments, expected):
            assert s == pytest.approx(es, abs=1e-10)
            assert e == pytest.approx(ee, abs=1e-10)
            assert f == pytest.approx(ef, abs=1e-10)
        assert eq.social_cost == pytest.approx(50.0, abs=1e-10)
        opt = fluid_social_optimum(p)
        assert opt.segments[0] == pytest.approx((-5.0, 5.0, 0.1), abs=1e-10)
        assert opt.social_cost == pytest.approx(25.0, abs=1e-10)

    def test_step_ordering(self):
        for seed in range(6):
            rng = np.random.default_rng(seed)
            L, mu, a, b1, b2 = rng.uniform(0.5, 10, 5)
            eq = fluid_equilibrium(ModelParams.fluid(L, mu, a, b1, b2))
            f1, f2, f3 = (f for _, _, f in eq.segments)
            assert f1 > f2 > f3

    def test_poa_is_two(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            a, b1, b2 = 10 ** rng.uniform(-1, 1, 3)
            L = rng.uniform(1, 100)
            assert price_of_anarchy(ModelParams.fluid(L, 1.0, a, b1, b2)) == \
                pytest.approx(2.0, abs=1e-9)

    def test_indifference_on_support(self):
        p = ModelParams.fluid(7, 1.4, 0.6, 1.1, 2.3)
        eq = fluid_equilibrium(p)
        lo, hi = eq.support
        for t in np.linspace(lo + 1e-9, hi - 1e-9, 17):
            c = density_cost_at(p, eq.segments, eq.atoms, float(t))
            assert c == pytest.approx(eq.drop_cost, rel=1e-9)

    def test_wrong_kind_rejected(self):
        with pytest.raises(ConfigInvalid):
            fluid_equilibrium(ModelParams.stochastic(5, 1, 1, 1, 1))


class TestClosingTimeOnly:
    def test_reference_instance(self):
        p = ModelParams.fluid(10, 1, 1, 1, 1, t2=2)
        eq = fluid_equilibrium(p)
        assert eq.case_label == T2_ONLY
        expected = [(-6.0, -3.0, 0.2), (-3.0, 0.0, 0.1), (0.0, 2.0, 0.05)]
        for (s, e, f), (es, ee, ef) in zip(eq.segments, expected):
            assert (s, e, f) == pytest.approx((es, ee, ef), abs=1e-10)
        assert eq.social_cost == pytest.approx(60.0, abs=1e-9)
        opt = fluid_social_optimum(p)
        assert opt.case_label == OPT_T2
        assert opt.social_cost == pytest.approx(28.0, abs=1e-9)
        assert opt.atoms == [(2.0, pytest.approx(0.2, abs=1e-12))]
        assert price_of_anarchy(p) == pytest.approx(15.0 / 7.0, abs=1e-9)

    def test_poa_limit_at_closed_door(self):
        p = ModelParams.fluid(10, 1, 1, 1, 1, t2=1e-8)
        assert price_of_anarchy(p) == pytest.approx(2.0, abs=1e-6)

    def test_wide_opening_short_closing_has_no_atom(self):
        # window shorter than the service need, but the opening bound is
        # loose enough that no atom forms
        p = ModelParams.fluid(10, 1, 1, 1, 1, t1=7, t2=1)
        eq = fluid_equilibrium(p)
        assert eq.case_label == T2_ONLY
        assert not eq.atoms
        assert eq.total_mass() == pytest.approx(1.0, abs=1e-10)


class TestOpeningTimeRegime:
    def setup_method(self):
        self.base = dict(volume=10, mu=1, alpha=0.1, beta1=1, beta2=1)

    def test_pure_reference(self):
        p = ModelParams.fluid(t1=2, **self.base)
        eq = fluid_equilibrium(p)
        assert eq.case_label == T1_PURE
        assert eq.thresholds["a1"] == pytest.approx(3.784048752, abs=1e-8)
        assert eq.atoms == [(-2.0, 1.0)]
        assert eq.social_cost == pytest.approx(57.0, abs=1e-9)

    def test_case_labels_sweep_and_social_cost(self):
        p0 = ModelParams.fluid(t1=4.99, **self.base)
        thr = fluid_equilibrium(p0).thresholds
        a1, a2, a3, a4 = thr["a1"], thr["a2"], thr["a3"], thr["a4"]
        assert 0 < a1 < a2 < a3 < a4
        for t1, label in [((a1 + a2) / 2, T1_CASE2), ((a2 + a3) / 2, T1_CASE3),
                          ((a3 + a4) / 2, T1_CASE4)]:
            p = ModelParams.fluid(t1=t1, **self.base)
            eq = fluid_equilibrium(p)
            assert eq.case_label == label
            assert eq.total_mass() == pytest.approx(1.0, abs=1e-10)
            # mixed-case social cost: the last drop arrives to an empty queue
            assert eq.social_cost == pytest.approx(
                p.lam * p.beta2 * (p.lam / p.mu - t1), rel=1e-12)

    def test_atom_shrinks_with_later_opening(self):
        masses = []
        for t1 in np.linspace(3.9, 4.9, 6):
            eq = fluid_equilibrium(ModelParams.fluid(t1=t1, **self.base))
            masses.append(sum(m for _, m in eq.atoms))
        assert all(x > y for x, y in zip(masses, masses[1:]))

    def test_poa_alpha_independent_in_mixed_cases(self):
        ratios = []
        for alpha in (0.05, 0.2, 0.8, 2.0, 5.0):
            p = ModelParams.fluid(10, 1, alpha, 1, 1, t1=4.0)
            eq = fluid_equilibrium(p)
            assert eq.case_label in (T1_CASE2, T1_CASE3, T1_CASE4)
            ratios.append(price_of_anarchy(p))
        assert max(ratios) - min(ratios) <= 1e-9

    def test_social_optimum(self):
        p = ModelParams.fluid(t1=4.0, **self.base)
        opt = fluid_social_optimum(p)
        assert opt.case_label == OPT_T1
        assert opt.segments == [(-4.0, 6.0, pytest.approx(0.1, abs=1e-14))]
        assert opt.social_cost == pytest.approx(
            0.5 * (1 * 16 + 1 * 36), abs=1e-9)


class TestJointRegime:
    def setup_method(self):
        self.base = dict(volume=8, mu=1.3, alpha=0.5, beta1=1, beta2=2)
        self.t2 = 2.0

    def test_case_sweep(self):
        probe = fluid_equilibrium(ModelParams.fluid(t2=self.t2, t1=3.9, **self.base))
        thr = probe.thresholds
        a1, a2, a3 = thr["a1p"], thr["a2p"], thr["a3p"]
        lb = thr["lb_t2"]
        assert 0 < a1 < a2 < a3 < lb
        for t1, label in [(a1 * 0.9, "JOINT_CASE1"), ((a1 + a2) / 2, JOINT_CASE2),
                          ((a2 + a3) / 2, JOINT_CASE3), ((a3 + lb) / 2, JOINT_CASE4)]:
            eq = fluid_equilibrium(ModelParams.fluid(t2=self.t2, t1=t1, **self.base))
            assert eq.case_label == label
            assert eq.total_mass() == pytest.approx(1.0, abs=1e-10)

    def test_mixed_social_cost_formula(self):
        p = ModelParams.fluid(t2=self.t2, t1=3.6, **self.base)
        eq = fluid_equilibrium(p)
        expected = p.lam * (p.beta2 * p.t2 + (p.alpha + p.beta2)
                            * (p.lam / p.mu - p.t1 - p.t2))
        assert eq.social_cost == pytest.approx(expected, rel=1e-12)

    def test_social_optimum_parks_mass_at_closing(self):
        p = ModelParams.fluid(t2=self.t2, t1=2.0, **self.base)
        opt = fluid_social_optimum(p)
        assert opt.case_label == OPT_JOINT_CASE1
        (t_atom, m_atom), = opt.atoms
        assert t_atom == self.t2
        assert m_atom == pytest.approx(
            (p.lam - (p.t1 + p.t2) * p.mu) / p.lam, abs=1e-12)
        assert opt.total_mass() == pytest.approx(1.0, abs=1e-12)


class TestOptimumDominatesEquilibrium:
    @pytest.mark.parametrize("seed", range(12))
    def test_poa_at_least_one_everywhere(self, seed):
        rng = np.random.default_rng(900 + seed)
        L = rng.uniform(2, 20)
        mu = rng.uniform(0.3, 2.0)
        a, b1, b2 = 10 ** rng.uniform(-0.7, 0.7, 3)
        te1 = b2 * L / ((b1 + b2) * mu)
        te2 = b1 * L / ((b1 + b2) * mu)
        t1 = rng.uniform(0.05, 1.5) * te1
        t2 = rng.uniform(0.05, 1.5) * te2
        p = ModelParams.fluid(L, mu, a, b1, b2, t1=t1, t2=t2)
        eq = fluid_equilibrium(p)
        opt = fluid_social_optimum(p)
        assert opt.social_cost <= eq.social_cost + 1e-9 * eq.social_cost, (
            eq.case_label, opt.case_label)
        assert eq.total_mass() == pytest.approx(1.0, abs=1e-9)
        assert opt.total_mass() == pytest.approx(1.0, abs=1e-9)


class TestBoundaryContinuity:
    def _pair(self, make, threshold, span=1e-8):
        lo = make(threshold - span)
        hi = make(threshold + span)
        return lo, hi

    def test_t1_thresholds(self):
        base = dict(volume=10, mu=1, alpha=0.1, beta1=1, beta2=1)
        thr = fluid_equilibrium(ModelParams.fluid(t1=4.99, **base)).thresholds

        def make(t1):
            return fluid_equilibrium(ModelParams.fluid(t1=t1, **base))

        for name in ("a1", "a2", "a3"):
            lo, hi = self._pair(make, thr[name])
            assert solutions_close(lo, hi, -thr[name] - 1, 11.0), name
        # at a1 the atom fills the whole population
        _, hi = self._pair(make, thr["a1"])
        assert sum(m for _, m in hi.atoms) == pytest.approx(1.0, abs=1e-5)
        # at a4 the opening bound stops binding
        lo, hi = self._pair(make, thr["a4"])
        assert hi.case_label == UNCONSTRAINED
        assert solutions_close(lo, hi, -6.0, 11.0)

    def test_joint_thresholds(self):
        base = dict(volume=8, mu=1.3, alpha=0.5, beta1=1, beta2=2)
        t2 = 2.0
        thr = fluid_equilibrium(ModelParams.fluid(t1=3.9, t2=t2, **base)).thresholds

        def make(t1):
            return fluid_equilibrium(ModelParams.fluid(t1=t1, t2=t2, **base))

        for name in ("a1p", "a2p", "a3p"):
            lo, hi = self._pair(make, thr[name])
            assert solutions_close(lo, hi, -thr[name] - 1, t2), name
        _, hi = self._pair(make, thr["a1p"])
        assert sum(m for _, m in hi.atoms) == pytest.approx(1.0, abs=1e-5)
        # the atom vanishes continuously where the opening stops binding
        lb = thr["lb_t2"]
        lo, hi = self._pair(make, lb)
        assert hi.case_label == T2_ONLY
        assert solutions_close(lo, hi, -lb - 1, t2)

    def test_regime_edge_joint_to_opening_only(self):
        # with a loose closing bound, crossing t1 + t2 = volume/mu moves
        # between the joint and opening-only regimes without a jump
        base = dict(volume=8, mu=1.3, alpha=0.5, beta1=1, beta2=2)
        t2 = 2.5  # above the unconstrained latest arrival time

        def make(t1):
            return fluid_equilibrium(ModelParams.fluid(t1=t1, t2=t2, **base))

        a4p = 8 / 1.3 - t2
        lo, hi = self._pair(make, a4p)
        assert lo.case_label.startswith("JOINT")
        assert hi.case_label.startswith("T1_")
        assert solutions_close(lo, hi, -a4p - 1, t2)


# --------------------------------------------------------------------------
# independent brute-force solve of each regime's defining equations


def _multistart(eqs, starts):
    """Root of a small square system, retrying start points until the
    residual vanishes."""
    best, best_res = None, np.inf
    for x0 in starts:
        with np.errstate(all="ignore"):
            sol, _, ier, _ = fsolve(eqs, x0, xtol=1e-13, full_output=True)
        res = float(np.max(np.abs(eqs(sol))))
        if res < best_res:
            best, best_res = sol, res
        if res < 1e-9:
            break
    assert best_res < 1e-8, f"oracle system unsolved (residual {best_res:.2e})"
    return best


def brute_t1_case(p, which):
    L, mu, a, b1, b2 = p.lam, p.mu, p.alpha, p.beta1, p.beta2
    t1c = p.t1
    span = L / mu - t1c

    def atom(mass):
        c = b1 * t1c + a * mass * L / (2 * mu)
        if mass * L / mu > t1c:
            c += b2 * (mass * L - t1c * mu) ** 2 / (2 * mu * mass * L)
        return c

    if which == 2:
        def eqs(x):
            p1, t1 = x
            return [atom(p1) - (b2 * (p1 * L / mu - t1c)
                                + a * (p1 * L / mu - t1c - t1)),
                    p1 + (a / (a + b2)) * (mu / L) * (L / mu - t1c - t1) - 1]
        return _multistart(eqs, [[0.8, 0.1], [0.95, 0.5 * span],
                                 [0.99, 0.05 * span], [0.6, 0.8 * span]])
    if which == 3:
        def eqs(x):
            p1, t2 = x
            return [atom(p1) - (-b1 * t2 + a * (p1 * L / mu - t1c - t2)
                                + b2 * (p1 * L / mu - t1c)),
                    p1 + ((a + b1) / (a + b2)) * (mu / L) * (-t2)
                    + (a / (a + b2)) * (1 - t1c * mu / L) - 1]
        return _multistart(eqs, [[0.7, -0.3], [0.9, -0.1 * t1c], [0.5, -0.5 * t1c]])

    def eqs(x):
        p2, t3, t4 = x
        return [b1 * t1c + a * p2 * L / (2 * mu)
                - (-b1 * t3 + a * (p2 * L / mu - t1c - t3)),
                (-b1 * t3 + a * (p2 * L / mu - t1c - t3)) + (b1 + a) * t4,
                p2 + (t4 - t3) * ((a + b1) / a) * (mu / L)
                + ((a + b1) / (a + b2)) * (mu / L) * (-t4)
                + (a / (a + b2)) * (1 - t1c * mu / L) - 1]
    return _multistart(eqs, [[0.3, -1.0, -0.5], [0.1, -0.3 * t1c, -0.1 * t1c],
                             [0.6, -0.6 * t1c, -0.2 * t1c]])


def brute_joint_case(p, which):
    L, mu, a, b1, b2 = p.lam, p.mu, p.alpha, p.beta1, p.beta2
    t1c, t2c = p.t1, p.t2

    def atom(mass):
        c = b1 * t1c + a * mass * L / (2 * mu)
        if mass * L / mu > t1c:
            c += b2 * (mass * L - t1c * mu) ** 2 / (2 * mu * mass * L)
        return c

    if which == 2:
        def eqs(x):
            p1, t1 = x
            return [atom(p1) - (b2 * (p1 * L / mu - t1c)
                                + a * (p1 * L / mu - t1c - t1)),
                    p1 + (a / (a + b2)) * (mu / L) * (t2c - t1) - 1]
        return _multistart(eqs, [[0.9, 0.3], [0.97, 0.7 * t2c], [0.8, 0.1 * t2c]])
    if which == 3:
        def eqs(x):
            p1, t2 = x
            return [atom(p1) - (-b1 * t2 + a * (p1 * L / mu - t1c - t2)
                                + b2 * (p1 * L / mu - t1c)),
                    p1 + ((a + b1) / (a + b2)) * (mu / L) * (-t2)
                    + (a / (a + b2)) * (mu / L) * t2c - 1]
        return _multistart(eqs, [[0.85, -0.3], [0.95, -0.05 * t1c],
                                 [0.6, -0.4 * t1c]])

    def eqs(x):
        p2, t3, t4 = x
        return [b1 * t1c + a * p2 * L / (2 * mu)
                - (-b1 * t3 + a * (p2 * L / mu - t1c - t3)),
                (-b1 * t3 + a * (p2 * L / mu - t1c - t3)) + (b1 + a) * t4,
                p2 + (t4 - t3) * ((a + b1) / a) * (mu / L)
                + ((a + b1) / (a + b2)) * (mu / L) * (-t4)
                + (a / (a + b2)) * (mu / L) * t2c - 1]
    return _multistart(eqs, [[0.3, -1.0, -0.5], [0.1, -0.3 * t1c, -0.1 * t1c],
                             [0.5, -0.6 * t1c, -0.2 * t1c]])


class TestClosedFormsAgainstBruteForce:
    def test_t1_regime(self):
        rng = np.random.default_rng(3)
        done = {2: 0, 3: 0, 4: 0}
        while min(done.values()) < 6:
            L = rng.uniform(2, 20)
            mu = rng.uniform(0.3, 2.0)
            a, b1, b2 = 10 ** rng.uniform(-0.7, 0.7, 3)
            probe = ModelParams.fluid(L, mu, a, b1, b2,
                                      t1=0.5 * b2 * L / ((b1 + b2) * mu))
            thr = fluid_equilibrium(probe).thresholds
            a1 = thr["a1"] if thr["a1"] is not None else 0.0
            for which, (lo, hi) in ((2, (a1, thr["a2"])), (3, (thr["a2"], thr["a3"])),
                                    (4, (thr["a3"], thr["a4"]))):
                if done[which] >= 7 or lo is None or hi is None or hi <= lo:
                    continue
                t1 = lo + 0.5 * (hi - lo)
                p = ModelParams.fluid(L, mu, a, b1, b2, t1=t1)
                eq = fluid_equilibrium(p)
                if eq.case_label != {2: T1_CASE2, 3: T1_CASE3, 4: T1_CASE4}[which]:
                    continue
                brute = brute_t1_case(p, which)
                got = ([*eq.atom_sizes.values()] + [*eq.breakpoints.values()])
                assert np.allclose(sorted(got), sorted(brute), rtol=1e-6), (
                    which, p, got, brute)
                done[which] += 1

    def test_joint_regime(self):
        rng = np.random.default_rng(4)
        done = {2: 0, 3: 0, 4: 0}
        while min(done.values()) < 6:
            L = rng.uniform(3, 20)
            mu = rng.uniform(0.3, 2.0)
            a, b1, b2 = 10 ** rng.uniform(-0.7, 0.7, 3)
            te2 = b1 * L / ((b1 + b2) * mu)
            t2 = rng.uniform(0.1, 0.9) * te2
            probe = ModelParams.fluid(L, mu, a, b1, b2, t1=1e9, t2=t2)
            lb = fluid_equilibrium(probe).thresholds.get("lb")
            probe2 = ModelParams.fluid(L, mu, a, b1, b2, t1=0.9 * lb, t2=t2)
            thr = fluid_equilibrium(probe2).thresholds
            a1 = thr["a1p"] if thr["a1p"] is not None else 0.0
            for which, (lo, hi) in ((2, (a1, thr["a2p"])),
                                    (3, (thr["a2p"], thr["a3p"])),
                                    (4, (thr["a3p"], thr["lb_t2"]))):
                if done[which] >= 7 or lo is None or hi is None or hi <= lo:
                    continue
                t1 = lo + 0.5 * (hi - lo)
                p = ModelParams.fluid(L, mu, a, b1, b2, t1=t1, t2=t2)
                eq = fluid_equilibrium(p)
                if eq.case_label != {2: JOINT_CASE2, 3: JOINT_CASE3,
                                     4: JOINT_CASE4}[which]:
                    continue
                brute = brute_joint_case(p, which)
                got = ([*eq.atom_sizes.values()] + [*eq.breakpoints.values()])
                assert np.allclose(sorted(got), sorted(brute), rtol=1e-6), (
                    which, p, got, brute)
                done[which] += 1
