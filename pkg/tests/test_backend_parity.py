"""The compiled march kernel and the numpy fallback must agree on every
stop mode; the solvers must be deterministic under either backend."""

import numpy as np
import pytest

from arrivalq import backend
from arrivalq._march_py import march as march_pure

_march = pytest.importorskip("arrivalq._march",
                             reason="compiled extension not built")


def _empty(n):
    p = np.zeros(n)
    p[0] = 1.0
    return p


CASES = [
    # (p0, t0, dt, t_hard, lam, mu, alpha, beta1, beta2, mass_target) -> stop mode
    (_empty(21), -3.0, 0.002, 50.0, 5, 1, 1, 1, 1, 1.0),      # fzero
    (_empty(21), -8.0, 0.002, 50.0, 5, 1, 1, 1, 1, 1.0),      # mass overshoot
    (_empty(21), -3.0, 0.002, 0.8, 5, 1, 1, 1, 1, 1.0),       # hard stop
    (_empty(13), -2.0, 0.005, 30.0, 3, 0.3, 1, 0.5, 1, 0.6),  # partial target
    (_empty(9), 0.5, 0.004, 20.0, 2, 1.5, 0.7, 1.2, 2.0, 1.0),  # positive start
]


@pytest.mark.parametrize("case", CASES)
def test_march_parity(case):
    p0, t0, dt, t_hard, lam, mu, alpha, beta1, beta2, target = case
    a = _march.march(p0, t0, dt, t_hard, lam, mu, alpha, beta1, beta2,
                     0.0, target, True)
    b = march_pure(p0, t0, dt, t_hard, lam, mu, alpha, beta1, beta2,
                   0.0, target, True)
    assert a[0] == b[0]                                   # status
    assert a[1] == pytest.approx(b[1], rel=1e-12, abs=1e-12)  # t_end
    assert a[2] == pytest.approx(b[2], rel=1e-12, abs=1e-12)  # mass
    assert len(a[3]) == len(b[3])
    np.testing.assert_allclose(a[3], b[3], rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(a[4], b[4], rtol=1e-10, atol=1e-13)
    np.testing.assert_allclose(a[6], b[6], rtol=1e-10, atol=1e-13)


def test_solver_agrees_across_backends(monkeypatch, base_params, tight_cfg):
    from arrivalq.equilibrium import solve_unconstrained

    sol_compiled = solve_unconstrained(base_params, tight_cfg)
    monkeypatch.setattr(backend, "march", march_pure)
    monkeypatch.setattr(backend, "BACKEND", "pure")
    sol_pure = solve_unconstrained(base_params, tight_cfg)
    assert sol_pure.te1 == pytest.approx(sol_compiled.te1, rel=1e-9)
    assert sol_pure.te2 == pytest.approx(sol_compiled.te2, rel=1e-9)


def test_solver_deterministic(base_params, tight_cfg):
    from arrivalq.equilibrium import solve_unconstrained

    a = solve_unconstrained(base_params, tight_cfg)
    b = solve_unconstrained(base_params, tight_cfg)
    assert a.te1 == b.te1 and a.te2 == b.te2
    assert np.array_equal(a.strategy.grid, b.strategy.grid)
    assert np.array_equal(a.strategy.values, b.strategy.values)
