"""Closed-form reference solutions of the first corrector equation.

In one dimension the equation reduces to ``alpha**2/2 w'' + sigma**2 rho**2 / 2 = a``
on the no-trade interval with constant slopes outside it.  Integrating twice
and imposing smooth pasting (``w'' = 0`` and the prescribed slopes at both ends)
pins the interval, the eigenvalue and the potential:

    rho_plus**3 = 3 alpha**2 (lam10 + lam01) / (4 sigma**2)
    a           = sigma**2 rho_plus**2 / 2
    w(rho)      = (a rho**2 - sigma**2 rho**4 / 12) / alpha**2 + C rho,  C = (lam10 - lam01) / 2

The interval is symmetric even for asymmetric costs; the asymmetry only tilts
the potential through ``C``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateInput, InapplicableStructure


@dataclass(frozen=True)
class OneDimSolution:
    sigma: float
    alpha: float
    lam01: float
    lam10: float
    rho_plus: float
    a_bar: float
    slope_shift: float

    def _inner(self, rho):
        s2, a2 = self.sigma**2, self.alpha**2
        return (self.a_bar * rho**2 - s2 * rho**4 / 12.0) / a2 + self.slope_shift * rho

    def w(self, rho):
        rho = np.asarray(rho, dtype=float)
        rp = self.rho_plus
        inner = self._inner(np.clip(rho, -rp, rp))
        upper = self._inner(rp) + self.lam10 * (rho - rp)
        lower = self._inner(-rp) - self.lam01 * (rho + rp)
        return np.where(rho > rp, upper, np.where(rho < -rp, lower, inner))

    def dw(self, rho):
        rho = np.asarray(rho, dtype=float)
        s2, a2 = self.sigma**2, self.alpha**2
        inner = (2 * self.a_bar * rho - s2 * rho**3 / 3.0) / a2 + self.slope_shift
        return np.where(
            rho > self.rho_plus, self.lam10, np.where(rho < -self.rho_plus, -self.lam01, inner)
        )

    def d2w(self, rho):
        rho = np.asarray(rho, dtype=float)
        inner = (2 * self.a_bar - self.sigma**2 * rho**2) / self.alpha**2
        return np.where(np.abs(rho) > self.rho_plus, 0.0, inner)

    def ode_residual(self, rho):
        """``alpha**2/2 w'' + sigma**2 rho**2/2 - a`` (zero on the no-trade interval)."""
        rho = np.asarray(rho, dtype=float)
        return 0.5 * self.alpha**2 * self.d2w(rho) + 0.5 * self.sigma**2 * rho**2 - self.a_bar

    @property
    def nt_interval(self) -> tuple[float, float]:
        return (-self.rho_plus, self.rho_plus)


def solve_1d_closed_form(sigma, alpha, lam01, lam10) -> OneDimSolution:
    sigma, alpha = float(sigma), float(alpha)
    lam01, lam10 = float(lam01), float(lam10)
    if sigma == 0.0 or alpha == 0.0:
        raise DegenerateInput("sigma and alphaBar must be nonzero")
    if not (np.isfinite(lam01) and np.isfinite(lam10)) or lam01 < 0 or lam10 < 0:
        raise DegenerateInput("both one-way costs must be finite and nonnegative")
    total = lam01 + lam10
    rho_plus = np.cbrt(3.0 * alpha**2 * total / (4.0 * sigma**2))
    a_bar = 0.5 * sigma**2 * rho_plus**2
    return OneDimSolution(
        sigma=abs(sigma),
        alpha=abs(alpha),
        lam01=lam01,
        lam10=lam10,
        rho_plus=float(rho_plus),
        a_bar=float(a_bar),
        slope_shift=0.5 * (lam10 - lam01),
    )


@dataclass(frozen=True)
class SeparableSolution:
    axes: tuple

    @property
    def a_hat(self) -> float:
        return float(sum(ax.a_bar for ax in self.axes))

    def w(self, rho):
        rho = np.asarray(rho, dtype=float)
        return sum(ax.w(rho[..., k]) for k, ax in enumerate(self.axes))

    def grad(self, rho):
        rho = np.asarray(rho, dtype=float)
        return np.stack([ax.dw(rho[..., k]) for k, ax in enumerate(self.axes)], axis=-1)

    def laplacian_terms(self, rho):
        rho = np.asarray(rho, dtype=float)
        return np.stack([ax.d2w(rho[..., k]) for k, ax in enumerate(self.axes)], axis=-1)

    def nt_box(self) -> np.ndarray:
        """``(d, 2)`` array of per-axis no-trade intervals."""
        return np.array([ax.nt_interval for ax in self.axes])


def separable_solution(per_axis: Sequence[OneDimSolution]) -> SeparableSolution:
    return SeparableSolution(axes=tuple(per_axis))


def separable_from_problem(problem) -> SeparableSolution:
    """Separable solution for diagonal coefficients and cash-only transfers."""
    S, ab, lam = problem.cost_matrix, problem.alpha_bar, problem.lam
    d = problem.d
    if not (np.allclose(S, np.diag(np.diag(S))) and np.allclose(ab, np.diag(np.diag(ab)))):
        raise InapplicableStructure("cost and diffusion matrices must be diagonal")
    for i in range(1, d + 1):
        for j in range(1, d + 1):
            if i != j and np.isfinite(lam[i, j]):
                raise InapplicableStructure("asset-to-asset transfers must be forbidden")
    axes = [
        solve_1d_closed_form(S[k, k], ab[k, k], lam[0, k + 1], lam[k + 1, 0]) for k in range(d)
    ]
    return separable_solution(axes)
