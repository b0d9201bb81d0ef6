import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from corrector.errors import UnboundedDirection
from corrector.support import (
    constraint_rows,
    delta_C,
    delta_C_many,
    is_bounded,
    max_gradient_norm,
    polytope_vertices,
    simplex_max,
)

INF = np.inf
LAM1 = np.array([[0, 0.001], [0.003, 0]])
LAM0 = np.array([[0, 1e-3, 1e-3], [1e-3, 0, INF], [1e-3, INF, 0]])
LAM_ALL = np.array([[0, 1e-3, 2e-3], [1e-3, 0, 1.5e-3], [2e-3, 0.5e-3, 0]])
LAM3 = np.array(
    [[0, 1e-3, 2e-3, 3e-3], [1e-3, 0, 1e-3, INF], [2e-3, 1e-3, 0, 1e-3], [3e-3, INF, 1e-3, 0]]
)


def test_one_dimensional_support():
    # u = w' with -lam01 <= u <= lam10
    assert delta_C([1.0], LAM1) == pytest.approx(0.003)
    assert delta_C([-1.0], LAM1) == pytest.approx(0.001)
    assert delta_C([0.0], LAM1) == 0.0


def test_separable_sum():
    assert delta_C([1.0, 1.0], LAM0) == pytest.approx(0.002)
    assert delta_C([1.0, -2.0], LAM0) == pytest.approx(0.003)


def _linprog_support(rho, lam):
    A, b = constraint_rows(lam)
    res = linprog(-np.asarray(rho), A_ub=A, b_ub=b, bounds=[(None, None)] * len(rho))
    assert res.status == 0
    return -res.fun


@pytest.mark.parametrize("lam", [LAM0, LAM_ALL, LAM3])
def test_matches_reference_lp(lam):
    rng = np.random.default_rng(3)
    d = lam.shape[0] - 1
    for _ in range(25):
        rho = rng.normal(size=d)
        assert delta_C(rho, lam) == pytest.approx(_linprog_support(rho, lam), rel=1e-9, abs=1e-15)


@pytest.mark.parametrize("lam", [LAM0, LAM_ALL, LAM3])
def test_vertex_form_agrees_with_lp(lam):
    rng = np.random.default_rng(4)
    pts = rng.normal(size=(30, lam.shape[0] - 1))
    many = delta_C_many(pts, lam)
    single = [delta_C(p, lam) for p in pts]
    assert np.allclose(many, single, rtol=1e-10, atol=1e-16)


vec3 = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3)


@settings(max_examples=60, deadline=None)
@given(vec3, st.floats(0, 50))
def test_positive_homogeneity(rho, t):
    lhs = delta_C(t * np.array(rho), LAM3)
    assert lhs == pytest.approx(t * delta_C(rho, LAM3), rel=1e-9, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(vec3, vec3)
def test_subadditivity(a, b):
    a, b = np.array(a), np.array(b)
    assert delta_C(a + b, LAM3) <= delta_C(a, LAM3) + delta_C(b, LAM3) + 1e-12


def test_unbounded_direction():
    # asset 2 cannot trade at all
    lam = np.array([[0, 1e-3, INF], [1e-3, 0, INF], [INF, INF, 0]])
    assert not is_bounded(lam)
    with pytest.raises(UnboundedDirection):
        delta_C([0.0, 1.0], lam)
    assert delta_C([1.0, 0.0], lam) == pytest.approx(1e-3)


def test_simplex_small_lp():
    # max x + y s.t. x + 2y <= 4, 3x + y <= 6
    val, x = simplex_max(np.array([1.0, 1.0]), np.array([[1.0, 2.0], [3.0, 1.0]]), np.array([4.0, 6.0]))
    assert val == pytest.approx(2.8)
    assert np.allclose(x, [1.6, 1.2])


def test_simplex_degenerate_terminates():
    # redundant constraints meeting at one vertex (Bland's rule avoids cycling)
    A = np.array([[1.0, 1.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    val, _ = simplex_max(np.array([1.0, 1.0]), A, np.array([1.0, 1.0, 1.0, 1.0]))
    assert val == pytest.approx(1.0)


def test_vertices_and_norm():
    V = polytope_vertices(LAM0)
    assert len(V) == 4
    assert max_gradient_norm(LAM0) == pytest.approx(np.sqrt(2) * 1e-3)
