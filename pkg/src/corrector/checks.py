"""Structural invariants of a converged corrector solution.

Each check returns a :class:`CheckResult`; :func:`run_invariants` collects the
ones that apply to a given instance (symmetry and positivity only make sense
for symmetric data).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import CorrectorProblem, shifted
from .solver import SolverOptions, solve_policy_iteration
from .support import delta_C_many, polytope_vertices


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    value: float
    limit: float
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        extra = f" ({self.note})" if self.note else ""
        return f"{status} {self.name}: {self.value + 0.0:.3e} vs limit {self.limit:.3e}{extra}"


def default_tol(solution) -> float:
    """Tolerance for pointwise field checks: the binding tolerance scaled by ``h``."""
    return max(solution.tol_bind * solution.problem.h, 1e-12)


def _interior(problem: CorrectorProblem, off) -> np.ndarray:
    return np.isfinite(shifted(np.zeros(problem.shape), off)) & np.isfinite(
        shifted(np.zeros(problem.shape), tuple(-o for o in off))
    )


def second_differences(w: np.ndarray, problem: CorrectorProblem, off) -> np.ndarray:
    """``w(rho + h d) + w(rho - h d) - 2 w(rho)``; NaN where a neighbour is off-grid."""
    neg = tuple(-o for o in off)
    return shifted(w, off) + shifted(w, neg) - 2.0 * w


def symmetric_data(problem: CorrectorProblem) -> bool:
    lam = problem.lam
    diag = lambda M: np.allclose(M, np.diag(np.diag(M)))
    return bool(np.array_equal(lam, lam.T) and diag(problem.cost_matrix) and diag(problem.alpha_bar))


# individual checks


def check_howard_monotone(solution, opts: SolverOptions | None = None) -> CheckResult:
    opts = opts or SolverOptions()
    h = np.asarray(solution.a_history)
    jumps = np.diff(h) if h.size > 1 else np.zeros(1)
    worst = float(jumps.max())
    limit = opts.tol_a(float(h[0]))
    return CheckResult("howard-monotone", worst <= limit, max(worst, 0.0), limit)


def check_normalisation(solution) -> CheckResult:
    v = abs(float(solution.w[solution.problem.center]))
    return CheckResult("w(0)=0", v == 0.0, v, 0.0)


def check_nonnegative(solution, tol: float | None = None) -> CheckResult:
    tol = default_tol(solution) if tol is None else tol
    v = float(-solution.w.min())
    return CheckResult("w>=0", v <= tol, max(v, 0.0), tol)


def check_convexity(solution, tol: float | None = None) -> CheckResult:
    """Second differences along axes and transfer directions are ``>= -tol``."""
    problem = solution.problem
    tol = default_tol(solution) if tol is None else tol
    dirs = {tuple(int(x) for x in np.eye(problem.d, dtype=int)[k]) for k in range(problem.d)}
    dirs |= {tuple(int(x) for x in off) for off in problem.offsets}
    worst = 0.0
    for off in sorted(dirs):
        sd = second_differences(solution.w, problem, off)
        sd = sd[np.isfinite(sd)]
        if sd.size:
            worst = max(worst, float(-sd.min()))
    return CheckResult("convexity", worst <= tol, worst, tol)


def check_gradient_in_C(solution, tol: float | None = None) -> CheckResult:
    """``(w(rho + h d_ij) - w(rho)) / h >= -lam_ij - tol`` wherever the target is on the grid."""
    problem = solution.problem
    tol = solution.tol_bind if tol is None else tol
    r = problem.transfer_residuals(solution.w)
    r = np.where(problem.target_in_grid, r, -np.inf)
    worst = float(r.max()) if r.size else 0.0
    return CheckResult("gradient-in-C", worst <= tol, max(worst, 0.0), tol)


def check_residual(solution, tol: float) -> CheckResult:
    v = float(solution.residual_norm)
    return CheckResult("residual", v <= 10 * tol, v, 10 * tol)


def check_symmetry(solution, tol: float | None = None) -> CheckResult:
    tol = default_tol(solution) if tol is None else tol
    w = solution.w
    flip = (slice(None, None, -1),) * w.ndim
    v = float(np.abs(w - w[flip]).max())
    nt = solution.nt_mask
    same = bool(np.array_equal(nt, nt[flip]))
    return CheckResult("rho->-rho symmetry", v <= tol and same, v, tol, "" if same else "NT map differs")


def curvature_bound(solution, slack: float = 0.5) -> float:
    """Upper bound ``2 a_bar / lambda_min(A)`` on the pure second derivatives, with slack."""
    lam_min = float(np.linalg.eigvalsh(solution.problem.diffusion).min())
    return (1.0 + slack) * 2.0 * max(solution.a_bar, 0.0) / lam_min


def check_second_difference_bound(solution, slack: float = 0.5) -> CheckResult:
    """Axis second differences lie below ``M h^2`` with ``M`` from the eigenvalue bound."""
    problem = solution.problem
    M = curvature_bound(solution, slack) + default_tol(solution) / problem.h**2
    worst = 0.0
    for k in range(problem.d):
        off = tuple(int(x) for x in np.eye(problem.d, dtype=int)[k])
        sd = second_differences(solution.w, problem, off)
        sd = sd[np.isfinite(sd)]
        if sd.size:
            worst = max(worst, float(sd.max()) / problem.h**2)
    return CheckResult("second-difference bound", worst <= M, worst, M)


def check_flat_where_binding(solution) -> CheckResult:
    """Where a transfer binds at three consecutive nodes along its direction, ``w`` is affine there."""
    problem = solution.problem
    tol = 2.0 * solution.tol_bind * problem.h
    worst = 0.0
    for k, off in enumerate(problem.offsets):
        off = tuple(int(x) for x in off)
        neg = tuple(-o for o in off)
        b = solution.binding[k]
        both = b & shifted(b, off, fill=False) & shifted(b, neg, fill=False)
        if not both.any():
            continue
        sd = second_differences(solution.w, problem, off)[both]
        worst = max(worst, float(np.abs(sd).max()))
    return CheckResult("flat along binding transfers", worst <= tol, worst, tol)


def discounted_bounds(dsol) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Nodewise lower and upper envelopes ``(delta_C - K1)^+`` and ``K2/eta + delta_C``.

    ``K1 = max_v v^T (S^T S)^{-1} v / 2`` over the vertices of ``C`` is the
    smallest constant with ``delta_C - K1 <= |S rho|^2 / 2``; on the truncated
    grid ``K2 = max f + max_v v^T A v / 2`` bounds the discounted source.
    """
    problem = dsol.problem
    V = polytope_vertices(problem.lam)
    S = problem.cost_matrix
    G = np.linalg.inv(S.T @ S)
    K1 = 0.5 * float(np.max(np.einsum("ki,ij,kj->k", V, G, V)))
    K2 = float(problem.running_cost.max()) + 0.5 * float(
        np.max(np.einsum("ki,ij,kj->k", V, problem.diffusion, V))
    )
    dc = delta_C_many(problem.coords, problem.lam)
    return np.maximum(dc - K1, 0.0), K2 / dsol.eta + dc, K1, K2


def check_discounted_bounds(dsol, tol: float = 1e-12) -> CheckResult:
    lo, hi, _, _ = discounted_bounds(dsol)
    scale = max(1.0, float(np.abs(dsol.w).max()))
    worst = float(max((lo - dsol.w).max(), (dsol.w - hi).max()))
    return CheckResult("discounted envelope", worst <= tol * scale, max(worst, 0.0), tol * scale)


def lambda_sweep(problem: CorrectorProblem, factors, opts: SolverOptions | None = None) -> list[float]:
    """Eigenvalues for costs scaled by each factor, on the same grid."""
    from dataclasses import replace

    out = []
    for f in factors:
        p = replace(problem, lam=problem.lam * f)
        out.append(solve_policy_iteration(p, opts).a_bar)
    return out


def check_lambda_monotone(values, tol: float = 1e-12) -> CheckResult:
    v = np.asarray(values)
    worst = float(-np.diff(v).min()) if v.size > 1 else 0.0
    return CheckResult("lambda-monotone", worst <= tol, max(worst, 0.0), tol)


def run_invariants(solution, opts: SolverOptions | None = None) -> list[CheckResult]:
    """All applicable single-solution invariants."""
    opts = opts or SolverOptions()
    out = [
        check_howard_monotone(solution, opts),
        check_normalisation(solution),
        check_convexity(solution),
        check_gradient_in_C(solution),
        check_residual(solution, max(opts.tol_switch, 1e-10)),
        check_second_difference_bound(solution),
        check_flat_where_binding(solution),
    ]
    problem = solution.problem
    if np.array_equal(problem.lam, problem.lam.T):
        out.append(check_nonnegative(solution))
    if symmetric_data(problem):
        out.append(check_symmetry(solution))
    return out
