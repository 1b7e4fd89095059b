import numpy as np
import pytest

from arrivalq.equilibrium import solve_unconstrained
from arrivalq.params import ModelParams, SolverConfig


@pytest.fixture(scope="session")
def base_params():
    return ModelParams.stochastic(5, 1, 1, 1, 1)


@pytest.fixture(scope="session")
def tight_cfg():
    return SolverConfig(epsilon=1e-3, nmax_tail_prob=1e-6)


@pytest.fixture(scope="session")
def solved_base(base_params, tight_cfg):
    """Unconstrained equilibrium at the reference parameter set."""
    return solve_unconstrained(base_params, tight_cfg)


@pytest.fixture(scope="session")
def constrained_atom_params():
    return ModelParams.stochastic(3, 0.3, 1, 0.5, 1, t1=14)


def w_prime_around_zero(solution, params, width=3):
    """Finite-difference slopes of the expected waiting time at 0- and 0+."""
    grid = solution.strategy.grid
    states = solution.diagnostics["grid_states"]
    i0 = int(np.searchsorted(grid, 0.0))
    assert grid[i0] == 0.0
    w = states @ np.arange(states.shape[1]) / params.mu
    left = (w[i0] - w[i0 - width]) / (grid[i0] - grid[i0 - width])
    right = (w[i0 + width] - w[i0]) / (grid[i0 + width] - grid[i0])
    return left, right
