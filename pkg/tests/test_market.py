import numpy as np
import pytest

from corrector.errors import (
    DegenerateDiffusion,
    IllPosedCorrector,
    InvalidParameters,
    NonFiniteValue,
    SingularVolatility,
)
from corrector.market import (
    MarketParams,
    effective_diffusion,
    expansion_value,
    finite_pairs,
    hjb_residual,
    map_nt_region,
    second_corrector_operator,
    second_corrector_value,
    solve_merton,
    with_corrector,
)

INF = np.inf


def params_2d(**kw):
    base = dict(
        mu=[0.06, 0.06],
        r=0.02,
        sigma=[[0.2, 0.0], [0.05, 0.25]],
        beta=0.1,
        p=0.5,
        lam=[[0, 1e-3, 1e-3], [1e-3, 0, INF], [1e-3, INF, 0]],
    )
    base.update(kw)
    return MarketParams(**base)


def test_merton_1d_hand_values():
    # pi = (mu - r) / ((1 - p) sigma^2); kappa1 = r + m2 / (2 (1 - p))
    prm = MarketParams(mu=[0.1], r=0.02, sigma=[[0.5]], beta=0.1, p=0.5, lam=[[0, 1e-3], [1e-3, 0]])
    sol = solve_merton(prm)
    assert sol.pi[0] == pytest.approx(0.08 / (0.5 * 0.25))
    m2 = 0.08**2 / 0.25
    k1 = 0.02 + m2 / 1.0
    assert sol.kappa1 == pytest.approx(k1)
    assert sol.c0 == pytest.approx((0.1 - 0.5 * k1) / 0.5)
    assert sol.vK == pytest.approx(sol.c0 ** (-0.5))
    # alphaBar = (1 - p)(1 - pi) pi sigma in one dimension
    expected = 0.5 * (1 - sol.pi[0]) * sol.pi[0] * 0.5
    assert expected != 0.0
    assert sol.alpha_bar[0, 0] == pytest.approx(expected)


@pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
def test_hjb_residual_is_tiny(p):
    prm = params_2d(p=p, beta=0.3)
    sol = solve_merton(prm)
    z = np.array([0.01, 0.5, 1.0, 3.0, 100.0])
    assert np.abs(hjb_residual(sol, prm, z)).max() <= 1e-10


def test_hjb_residual_detects_wrong_constant():
    from dataclasses import replace

    prm = params_2d()
    sol = solve_merton(prm)
    bad = replace(sol, vK=sol.vK * 1.01)
    assert np.abs(hjb_residual(bad, prm, np.array([1.0]))).max() > 1e-4


def test_non_finite_value():
    with pytest.raises(NonFiniteValue):
        solve_merton(params_2d(beta=0.01))


def test_invalid_inputs():
    with pytest.raises(InvalidParameters):
        params_2d(p=1.2)
    with pytest.raises(InvalidParameters):
        params_2d(lam=[[0, -1e-3, 1e-3], [1e-3, 0, INF], [1e-3, INF, 0]])
    with pytest.raises(InvalidParameters):
        params_2d(lam=[[1, 1e-3, 1e-3], [1e-3, 0, INF], [1e-3, INF, 0]])
    with pytest.raises(SingularVolatility):
        params_2d(sigma=[[0.2, 0.2], [0.2, 0.2]])


def test_degenerate_diffusion_when_pi_hits_one():
    # pi = (mu - r) / ((1 - p) sigma^2) = 0.08 / (0.5 * 0.16) = 1 makes (1 - pi) vanish
    prm = MarketParams(mu=[0.1], r=0.02, sigma=[[0.4]], beta=0.5, p=0.5, lam=[[0, 1e-3], [1e-3, 0]])
    with pytest.raises(DegenerateDiffusion):
        effective_diffusion(solve_merton(prm), prm)
    ok = MarketParams(mu=[0.1], r=0.02, sigma=[[0.5]], beta=0.5, p=0.5, lam=[[0, 1e-3], [1e-3, 0]])
    assert effective_diffusion(solve_merton(ok), ok).shape == (1, 1)


def test_second_corrector_matches_source():
    prm = params_2d()
    sol = with_corrector(solve_merton(prm), 0.0131)
    z = np.array([0.3, 1.0, 2.0, 10.0])
    lhs = second_corrector_operator(prm, sol, lambda x: sol.u0 * x**sol.p, z)
    rhs = sol.marginal(z) * sol.eta(z) * sol.a_bar
    assert np.abs(lhs / rhs - 1).max() <= 1e-6


def test_second_corrector_errors():
    sol = solve_merton(params_2d())
    with pytest.raises(IllPosedCorrector):
        second_corrector_value(sol, np.nan)


def test_expansion_value_at_zero_epsilon_is_exact():
    sol = with_corrector(solve_merton(params_2d()), 0.01)
    z = np.array([0.5, 1.0, 4.0])
    assert np.array_equal(expansion_value(sol, z, 0.0), sol.value(z))
    assert np.all(expansion_value(sol, z, 0.1) < sol.value(z))
    with pytest.raises(ValueError):
        expansion_value(sol, [-1.0], 0.1)


def test_map_nt_region_is_affine_bijection():
    sol = solve_merton(params_2d())
    pts = np.array([[0.0, 0.0], [0.1, -0.05], [-0.2, 0.3]])
    y = map_nt_region(sol, 2.0, 0.05, pts)
    assert np.allclose(y[0], sol.pi * 2.0)
    back = (y - sol.pi * 2.0) / (0.05 * sol.eta(2.0))
    assert np.allclose(back, pts)


def test_finite_pairs_order():
    lam = np.array([[0, 1, 2], [3, 0, INF], [4, INF, 0]], dtype=float)
    assert finite_pairs(lam) == [(0, 1), (0, 2), (1, 0), (2, 0)]
