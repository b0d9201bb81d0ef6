import numpy as np
import pytest

from corrector.errors import DegenerateDiffusion, InvalidParameters, StencilOutOfDomain
from corrector.grid import (
    CorrectorProblem,
    NonMonotoneStencil,
    default_radius,
    generator_stencil,
    make_problem,
)
from corrector.support import delta_C_many

from conftest import LAM0, LAM_1D, LAM_ALL


def test_default_radius_standard():
    # doubled costs: rho_hat^3 = 3 * 0.004 / 4
    assert default_radius([[1.0]], [[1.0]], LAM_1D) == pytest.approx(3 * 0.003 ** (1 / 3))
    assert default_radius([[1.0]], [[1.0]], LAM_1D) == pytest.approx(0.4327, abs=1e-4)


def test_default_radius_scaling_and_clamp():
    r1 = default_radius(np.eye(2), np.eye(2), LAM0)
    assert default_radius(np.eye(2), np.eye(2), LAM0 * 8) == pytest.approx(2 * r1)
    assert default_radius([[1.0]], [[1.0]], np.zeros((2, 2)), min_radius=0.01) == 0.01


def test_problem_validation():
    with pytest.raises(InvalidParameters):
        make_problem([[1.0]], [[1.0]], LAM_1D, 6)
    with pytest.raises(InvalidParameters):
        make_problem([[1.0]], [[1.0]], LAM_1D, 3)
    with pytest.raises(DegenerateDiffusion):
        make_problem(np.eye(2), np.diag([1.0, 0.0]), LAM0, 11)
    lam = LAM0.copy()
    lam[0, 2] = lam[2, 0] = np.inf
    with pytest.raises(InvalidParameters):
        make_problem(np.eye(2), np.eye(2), lam, 11)


def test_geometry(problem_1d):
    p = problem_1d
    assert p.h == pytest.approx(2 * p.radius / 140)
    assert p.axis[p.center[0]] == 0.0
    assert p.boundary_mask.sum() == 2


@pytest.mark.parametrize(
    "A",
    [np.eye(2), np.array([[1.0, 0.3], [0.3, 0.8]]), np.array([[1.0, -0.4], [-0.4, 1.2]])],
)
def test_generator_exact_on_quadratics(A):
    alpha = np.linalg.cholesky(A)
    p = CorrectorProblem(np.eye(2), alpha, LAM0, radius=1.0, n=11)
    Q = np.array([[0.7, -0.2], [-0.2, 1.5]])
    w = np.einsum("...i,ij,...j->...", p.coords, Q, p.coords)
    for node in [(5, 5), (2, 7), (8, 1)]:
        assert p.apply_generator(w, node) == pytest.approx(np.trace(A @ Q), rel=1e-10)
    gf = p.generator_field(w)
    assert np.allclose(gf[~p.boundary_mask], np.trace(A @ Q))
    assert np.all(np.isnan(gf[p.boundary_mask]))


def test_generator_constants_and_hand_case():
    p = CorrectorProblem(np.eye(2), np.eye(2), LAM0, radius=1.0, n=11)
    assert p.apply_generator(np.full(p.shape, 3.0), (4, 4)) == 0.0
    w = p.coords[..., 0] ** 2
    assert p.apply_generator(w, (3, 6)) == pytest.approx(1.0)
    with pytest.raises(StencilOutOfDomain):
        p.apply_generator(w, (0, 4))


def test_stencil_weights_nonnegative_when_dominant():
    A = np.array([[1.0, 0.3], [0.3, 0.8]])
    for _, c in generator_stencil(A, 0.1):
        assert c > 0


def test_non_monotone_warning():
    alpha = np.linalg.cholesky(np.array([[1.0, 0.9], [0.9, 1.0]]))
    alpha = alpha @ np.diag([1.0, 1.0])
    A = np.array([[1.0, 0.9], [0.9, 0.85]])
    with pytest.warns(NonMonotoneStencil):
        make_problem(np.eye(2), np.linalg.cholesky(A), LAM0, 11)


def test_transfer_residual_examples(problem_1d):
    p = problem_1d
    zero = np.zeros(p.shape)
    r = p.transfer_residuals(zero)
    assert np.all(r[np.isfinite(r)] == -0.001)
    assert p.transfer_residual(zero, (70,), (1, 0)) == pytest.approx(-0.001)
    with pytest.raises(StencilOutOfDomain):
        p.transfer_residual(zero, (0,), (1, 0))
    with pytest.raises(StencilOutOfDomain):
        p.transfer_residual(zero, (3,), (1, 1))


def test_transfer_residual_on_support_function():
    p = make_problem(np.eye(2), np.eye(2), LAM_ALL, 41)
    w = delta_C_many(p.coords, LAM_ALL)
    r = p.transfer_residuals(w)
    assert r[np.isfinite(r)].max() <= 1e-15 + p.h * 0


def test_transfer_residual_on_oracle_outside(problem_1d):
    from corrector.oracles import solve_1d_closed_form

    p = problem_1d
    s = solve_1d_closed_form(1, 1, 1e-3, 1e-3)
    w = s.w(p.axis)
    k = p.pairs.index((1, 0))
    far = p.axis > s.rho_plus + 2 * p.h
    r = p.transfer_residuals(w)[k]
    assert np.abs(r[far & np.isfinite(r)]).max() <= 1e-12


def test_offsets_follow_transfer_direction():
    p = make_problem(np.eye(2), np.eye(2), LAM_ALL, 11)
    table = dict(zip(p.pairs, map(tuple, p.offsets)))
    assert table[(0, 1)] == (1, 0)
    assert table[(1, 0)] == (-1, 0)
    assert table[(1, 2)] == (-1, 1)
    assert table[(2, 1)] == (1, -1)
