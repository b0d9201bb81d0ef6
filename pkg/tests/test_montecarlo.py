import numpy as np
import pytest

from corrector.errors import NoNTRegion
from corrector.montecarlo import mc_allowance, mc_ergodic_cost, worker_count


def test_frozen_state_is_exact(solution_1d):
    est, se = mc_ergodic_cost(
        solution_1d, T=5.0, dt=1e-2, seed=0, n_paths=3, rho0=[0.05], alpha_bar=[[0.0]]
    )
    assert est == pytest.approx(0.5 * 0.05**2, rel=1e-12)
    assert se == 0.0


def test_seeds_agree_statistically(solution_1d):
    a = mc_ergodic_cost(solution_1d, T=2000.0, dt=1e-3, seed=1, n_paths=1000)
    b = mc_ergodic_cost(solution_1d, T=2000.0, dt=1e-3, seed=2, n_paths=1000)
    assert a != b
    assert abs(a[0] - b[0]) < 4 * np.hypot(a[1], b[1])


def test_same_seed_reproducible_across_threads(solution_1d, monkeypatch):
    import corrector.montecarlo as mc

    monkeypatch.setenv("CORRECTOR_THREADS", "1")
    one = mc_ergodic_cost(solution_1d, T=200.0, dt=1e-3, seed=7, n_paths=64)
    # force a multi-group split even on a single CPU
    monkeypatch.setattr(mc, "worker_count", lambda limit=None: 3)
    three = mc_ergodic_cost(solution_1d, T=200.0, dt=1e-3, seed=7, n_paths=64)
    assert one == three


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("CORRECTOR_THREADS", "1")
    assert worker_count() == 1
    monkeypatch.setenv("CORRECTOR_THREADS", "junk")
    assert worker_count() >= 1


def test_lower_bound_and_accuracy(solution_1d):
    est, se = mc_ergodic_cost(solution_1d, T=4000.0, dt=1e-3, seed=3, n_paths=2000)
    a = solution_1d.a_bar
    assert est >= a - (2 * se + mc_allowance(solution_1d, 1e-3))
    assert abs(est - a) / a <= 0.05


def test_no_nt_region(solution_1d):
    from dataclasses import replace

    bad = replace(solution_1d, binding=np.ones_like(solution_1d.binding))
    with pytest.raises(NoNTRegion):
        mc_ergodic_cost(bad, T=1.0, dt=1e-2, n_paths=2)
