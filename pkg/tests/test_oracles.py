import numpy as np
import pytest

from corrector.errors import DegenerateInput, InapplicableStructure
from corrector.grid import make_problem
from corrector.oracles import separable_from_problem, separable_solution, solve_1d_closed_form

INF = np.inf


def test_standard_instance_values():
    s = solve_1d_closed_form(1.0, 1.0, 0.001, 0.001)
    assert s.rho_plus == pytest.approx(0.114471, abs=5e-7)
    assert s.a_bar == pytest.approx(0.0065522, rel=1e-3)
    assert s.slope_shift == 0.0


@pytest.mark.parametrize(
    "sigma,alpha,l01,l10", [(1, 1, 1e-3, 1e-3), (0.7, 1.3, 0.0, 2e-3), (2.0, 0.4, 3e-3, 1e-3)]
)
def test_smooth_pasting_and_ode(sigma, alpha, l01, l10):
    s = solve_1d_closed_form(sigma, alpha, l01, l10)
    rp = s.rho_plus
    assert s.dw(rp) == pytest.approx(l10, rel=1e-12, abs=1e-18)
    assert s.dw(-rp) == pytest.approx(-l01, rel=1e-12, abs=1e-18)
    # second derivative of the interior polynomial vanishes at both ends
    inner_d2 = lambda x: (2 * s.a_bar - sigma**2 * x**2) / alpha**2
    assert abs(inner_d2(rp)) <= 1e-15
    assert abs(inner_d2(-rp)) <= 1e-15
    x = np.linspace(-rp, rp, 101)
    assert np.abs(s.ode_residual(x)).max() <= 1e-12
    assert float(s.w(0.0)) == 0.0
    # derivative matches a centred difference of w
    e = 1e-7
    xs = np.array([-2 * rp, -0.5 * rp, 0.3 * rp, 3 * rp])
    assert np.allclose((s.w(xs + e) - s.w(xs - e)) / (2 * e), s.dw(xs), atol=1e-9)
    assert np.all(s.d2w(np.linspace(-3 * rp, 3 * rp, 301)) >= 0)


def test_asymmetric_costs_keep_symmetric_interval():
    sym = solve_1d_closed_form(1, 1, 0.001, 0.001)
    asym = solve_1d_closed_form(1, 1, 0.0, 0.002)
    assert asym.rho_plus == pytest.approx(sym.rho_plus)
    assert asym.slope_shift == pytest.approx(0.001)


def test_costless_is_zero():
    s = solve_1d_closed_form(1, 1, 0, 0)
    assert s.rho_plus == 0 and s.a_bar == 0
    assert np.all(s.w(np.linspace(-1, 1, 5)) == 0)


def test_degenerate_input():
    with pytest.raises(DegenerateInput):
        solve_1d_closed_form(0.0, 1.0, 1e-3, 1e-3)
    with pytest.raises(DegenerateInput):
        solve_1d_closed_form(1.0, 1.0, -1e-3, 1e-3)


def test_separable_sum_and_normalisation():
    ax = solve_1d_closed_form(1, 1, 1e-3, 1e-3)
    sep = separable_solution([ax, ax])
    assert sep.a_hat == pytest.approx(2 * 0.0065522, rel=1e-3)
    assert float(sep.w(np.zeros(2))) == 0.0
    zero = solve_1d_closed_form(1, 1, 0, 0)
    assert separable_solution([ax, zero]).a_hat == pytest.approx(ax.a_bar)


def test_separable_residual_in_box():
    sig, alp = np.array([1.0, 0.6]), np.array([0.8, 1.4])
    axes = [solve_1d_closed_form(s, a, 1e-3, 2e-3) for s, a in zip(sig, alp)]
    sep = separable_solution(axes)
    rng = np.random.default_rng(0)
    box = sep.nt_box()
    pts = rng.uniform(box[:, 0], box[:, 1], size=(200, 2))
    lhs = 0.5 * (sep.laplacian_terms(pts) * alp**2).sum(axis=-1) + 0.5 * ((pts * sig) ** 2).sum(-1)
    assert np.abs(lhs - sep.a_hat).max() <= 1e-10


def test_separable_from_problem_preconditions():
    lam0 = np.array([[0, 1e-3, 1e-3], [1e-3, 0, INF], [1e-3, INF, 0]])
    sep = separable_from_problem(make_problem(np.eye(2), np.eye(2), lam0, 21))
    assert len(sep.axes) == 2
    lam_all = np.where(np.eye(3) > 0, 0.0, 1e-3)
    with pytest.raises(InapplicableStructure):
        separable_from_problem(make_problem(np.eye(2), np.eye(2), lam_all, 21))
    corr = np.array([[1, 0.2], [0.2, 1]])
    with pytest.raises(InapplicableStructure):
        separable_from_problem(make_problem(corr, corr, lam0, 21))
