import numpy as np
import pytest

from corrector.grid import make_problem
from corrector.solver import solve_policy_iteration

INF = np.inf
LAM_1D = np.array([[0.0, 0.001], [0.001, 0.0]])
LAM0 = np.array([[0, 1e-3, 1e-3], [1e-3, 0, INF], [1e-3, INF, 0]])
LAM_ALL = np.array([[0, 1e-3, 1e-3], [1e-3, 0, 1e-3], [1e-3, 1e-3, 0]])
LAM_PRIME = np.array([[0, 1e-3, 2e-3], [1e-3, 0, INF], [2e-3, INF, 0]])
SIGMA_MINUS = np.array([[1.0, -0.25], [-0.25, 1.0]])
SIGMA_PLUS = np.array([[1.0, 0.25], [0.25, 1.0]])

# closed-form 1D values for sigma = alphaBar = 1 and both costs 0.001
RHO_PLUS_1D = 0.0015 ** (1.0 / 3.0)
A_BAR_1D = 0.5 * RHO_PLUS_1D**2


@pytest.fixture(scope="session")
def problem_1d():
    return make_problem([[1.0]], [[1.0]], LAM_1D, 141)


@pytest.fixture(scope="session")
def solution_1d(problem_1d):
    return solve_policy_iteration(problem_1d)


@pytest.fixture(scope="session")
def solution_sep2d():
    return solve_policy_iteration(make_problem(np.eye(2), np.eye(2), LAM0, 61))


@pytest.fixture(scope="session")
def solution_all2d():
    return solve_policy_iteration(make_problem(np.eye(2), np.eye(2), LAM_ALL, 61))
