import numpy as np
import pytest

from corrector.checks import (
    check_convexity,
    check_discounted_bounds,
    check_lambda_monotone,
    check_symmetry,
    discounted_bounds,
    lambda_sweep,
    run_invariants,
    symmetric_data,
)
from corrector.grid import make_problem
from corrector.solver import solve_discounted, solve_policy_iteration

from conftest import LAM0, LAM_1D, LAM_ALL
from instances import INSTANCES


@pytest.mark.parametrize("name", sorted(INSTANCES))
def test_invariant_matrix(name):
    S, A, lam, n = INSTANCES[name]
    sol = solve_policy_iteration(make_problem(S, A, np.array(lam, float), n))
    failed = [r.line() for r in run_invariants(sol) if not r.ok]
    assert not failed


def test_checks_detect_violations(solution_1d):
    from dataclasses import replace

    bumped = solution_1d.w.copy()
    bumped[50] += 1e-6
    assert not check_convexity(replace(solution_1d, w=bumped)).ok
    skew = solution_1d.w + 1e-6 * solution_1d.problem.axis
    assert not check_symmetry(replace(solution_1d, w=skew)).ok


def test_symmetric_data_flags():
    assert symmetric_data(make_problem(np.eye(2), np.eye(2), LAM0, 11))
    corr = np.array([[1, 0.2], [0.2, 1]])
    assert not symmetric_data(make_problem(corr, corr, LAM0, 11))


def test_lambda_monotone():
    vals = lambda_sweep(make_problem(np.eye(2), np.eye(2), LAM_ALL, 41), [0.5, 1.0, 2.0, 4.0])
    assert check_lambda_monotone(vals).ok
    assert not check_lambda_monotone([2.0, 1.0]).ok


def test_discounted_envelope():
    p = make_problem([[1.0]], [[1.0]], LAM_1D, 141)
    d = solve_discounted(p, 1e-3)
    lo, hi, K1, K2 = discounted_bounds(d)
    # K1 = lam^2 / (2 sigma^2) in one dimension
    assert K1 == pytest.approx(0.5e-6)
    assert np.all(lo <= d.w) and np.all(d.w <= hi)
    assert check_discounted_bounds(d).ok
