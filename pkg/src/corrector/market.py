"""Frictionless Merton solution for power utility with constant coefficients.

Wealth is ``z``; the value function is ``v(z) = vK z**p / p`` and the optimal
risky positions are ``y(z) = pi * z``.  Everything the corrector layer needs
(the normalisation factor ``eta(z) = z / (1 - p)``, the effective diffusion of
the fast variable and the homothetic second-corrector coefficient) is derived
here in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import (
    DegenerateDiffusion,
    IllPosedCorrector,
    InvalidParameters,
    NonFiniteValue,
    SingularVolatility,
)

DEFAULT_DIFFUSION_FLOOR = 1e-10


def as_cost_matrix(lam, d: int) -> np.ndarray:
    """Coerce a cost matrix to float with ``inf`` marking forbidden transfers."""
    lam = np.array(lam, dtype=float)
    if lam.shape != (d + 1, d + 1):
        raise InvalidParameters(f"cost matrix must be {(d + 1, d + 1)}, got {lam.shape}")
    if np.isnan(lam).any():
        raise InvalidParameters("cost matrix contains NaN")
    if np.any(np.diag(lam) != 0.0):
        raise InvalidParameters("cost matrix must have a zero diagonal")
    if np.any(lam < 0):
        raise InvalidParameters("transaction costs must be nonnegative")
    return lam


def finite_pairs(lam: np.ndarray) -> list[tuple[int, int]]:
    """Ordered pairs ``(i, j)``, ``i != j``, whose transfer is allowed, in lexicographic order."""
    m = lam.shape[0]
    return [(i, j) for i in range(m) for j in range(m) if i != j and np.isfinite(lam[i, j])]


@dataclass(frozen=True)
class MarketParams:
    mu: np.ndarray
    r: float
    sigma: np.ndarray
    beta: float
    p: float
    lam: np.ndarray
    epsilon: float = 0.0
    d: int = field(init=False)

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        d = mu.shape[0]
        sigma = np.asarray(self.sigma, dtype=float).reshape(d, d)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "lam", as_cost_matrix(self.lam, d))
        if not 0.0 < self.p < 1.0:
            raise InvalidParameters(f"risk-aversion exponent p must lie in (0,1), got {self.p}")
        if self.epsilon < 0:
            raise InvalidParameters("epsilon must be nonnegative")
        cov = sigma @ sigma.T
        if np.linalg.cond(cov) > 1e12:
            raise SingularVolatility("sigma sigma^T is not invertible")

    @property
    def covariance(self) -> np.ndarray:
        return self.sigma @ self.sigma.T

    @property
    def excess_return(self) -> np.ndarray:
        return self.mu - self.r


@dataclass(frozen=True)
class MertonSolution:
    pi: np.ndarray
    c0: float
    vK: float
    p: float
    eta_factor: float
    alpha_bar: np.ndarray
    kappa1: float
    a_bar: Optional[float] = None
    u0: Optional[float] = None

    def value(self, z):
        return self.vK * np.asarray(z, dtype=float) ** self.p / self.p

    def marginal(self, z):
        return self.vK * np.asarray(z, dtype=float) ** (self.p - 1.0)

    def eta(self, z):
        return self.eta_factor * np.asarray(z, dtype=float)


def solve_merton(params: MarketParams) -> MertonSolution:
    """Closed-form Merton optimizers for ``U(c) = c**p / p``.

    ``kappa1 = r + m2 / (2 (1-p))`` with ``m2`` the squared Sharpe norm; the
    value is finite iff ``beta > p * kappa1`` and then ``c0 = (beta - p kappa1)/(1-p)``,
    ``vK = c0**(p-1)``.
    """
    p = params.p
    cov = params.covariance
    try:
        pi = np.linalg.solve(cov, params.excess_return) / (1.0 - p)
    except np.linalg.LinAlgError as exc:
        raise SingularVolatility(str(exc)) from exc
    m2 = float(params.excess_return @ np.linalg.solve(cov, params.excess_return))
    kappa1 = params.r + m2 / (2.0 * (1.0 - p))
    if params.beta <= p * kappa1:
        raise NonFiniteValue(
            f"beta={params.beta} <= p*kappa1={p * kappa1}: Merton value is infinite"
        )
    c0 = (params.beta - p * kappa1) / (1.0 - p)
    vK = c0 ** (p - 1.0)
    alpha_bar = _alpha_bar(pi, params.sigma, p)
    return MertonSolution(
        pi=pi, c0=c0, vK=vK, p=p, eta_factor=1.0 / (1.0 - p), alpha_bar=alpha_bar, kappa1=kappa1
    )


def _alpha_bar(pi: np.ndarray, sigma: np.ndarray, p: float) -> np.ndarray:
    d = pi.shape[0]
    return (1.0 - p) * (np.eye(d) - np.outer(pi, np.ones(d))) @ np.diag(pi) @ sigma


def effective_diffusion(
    sol: MertonSolution, params: MarketParams, floor: float = DEFAULT_DIFFUSION_FLOOR
) -> np.ndarray:
    """Normalised diffusion matrix of the fast variable, checked for ellipticity."""
    ab = _alpha_bar(sol.pi, params.sigma, params.p)
    smallest = float(np.linalg.eigvalsh(ab @ ab.T).min())
    if smallest < floor:
        raise DegenerateDiffusion(
            f"smallest eigenvalue of alphaBar alphaBar^T is {smallest:.3e} < floor {floor:.1e}"
        )
    return ab


def hjb_residual(sol: MertonSolution, params: MarketParams, z) -> np.ndarray:
    """Relative residual of the stationary Merton HJB at wealth ``z``.

    The sup over risky positions is recomputed from the first-order condition,
    independently of ``sol.pi``, and the convex conjugate of ``U`` from its maximiser.
    """
    z = np.asarray(z, dtype=float)
    p = params.p
    v = sol.value(z)
    vz = sol.marginal(z)
    vzz = -(1.0 - p) * sol.vK * z ** (p - 2.0)
    cstar = vz ** (1.0 / (p - 1.0))
    conj = cstar**p / p - cstar * vz
    cov = params.covariance
    ex = params.excess_return
    theta_dir = np.linalg.solve(cov, ex)  # theta = -(vz/vzz) * theta_dir
    theta = np.multiply.outer(-vz / vzz, theta_dir)
    lin = (theta @ ex) * vz
    quad = 0.5 * np.einsum("...i,ij,...j->...", theta, cov, theta) * vzz
    terms = np.stack([params.beta * v, -params.r * z * vz, -conj, -lin, -quad])
    return terms.sum(axis=0) / np.abs(terms).max(axis=0)


def second_corrector_operator(params: MarketParams, sol: MertonSolution, u, z, h_rel=1e-4):
    """Apply the second-corrector operator to a callable ``u`` by central differences."""
    z = np.asarray(z, dtype=float)
    step = h_rel * z
    up, u0, um = u(z + step), u(z), u(z - step)
    uz = (up - um) / (2 * step)
    uzz = (up - 2 * u0 + um) / step**2
    y = np.multiply.outer(z, sol.pi)
    drift = params.r * z + y @ params.excess_return - sol.c0 * z
    vol2 = np.einsum("...i,ij,...j->...", y, params.covariance, y)
    return params.beta * u0 - drift * uz - 0.5 * vol2 * uzz


def second_corrector_kappa(sol: MertonSolution) -> float:
    # A(z**p) = kappa2 z**p; for constant coefficients kappa2 collapses to c0.
    return sol.c0


def second_corrector_value(sol: MertonSolution, a_bar: float) -> float:
    """Coefficient ``u0`` of ``u(z) = u0 z**p`` solving ``A u = v_z eta a_bar``."""
    if not np.isfinite(a_bar):
        raise IllPosedCorrector(f"eigenvalue must be finite, got {a_bar}")
    kappa2 = second_corrector_kappa(sol)
    if kappa2 <= 0:
        raise IllPosedCorrector(f"kappa2={kappa2} <= 0")
    return sol.vK * a_bar / ((1.0 - sol.p) * kappa2)


def with_corrector(sol: MertonSolution, a_bar: float) -> MertonSolution:
    return replace(sol, a_bar=a_bar, u0=second_corrector_value(sol, a_bar))


def expansion_value(sol: MertonSolution, z, epsilon: float):
    """``v(z) - epsilon**2 u(z)``; requires ``sol.u0`` (see :func:`with_corrector`)."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("wealth must be positive")
    u0 = 0.0 if sol.u0 is None else sol.u0
    if epsilon == 0:
        return sol.value(z)
    return sol.value(z) - epsilon**2 * u0 * z**sol.p


def map_nt_region(sol: MertonSolution, z: float, epsilon: float, O0) -> np.ndarray:
    """Map fast-variable points to risky positions: ``pi z + epsilon eta(z) rho``."""
    if z <= 0:
        raise ValueError("wealth must be positive")
    pts = np.atleast_2d(np.asarray(O0, dtype=float))
    if pts.shape[0] == 0:
        raise ValueError("empty point set")
    if pts.shape[1] != sol.pi.shape[0]:
        pts = pts.reshape(-1, sol.pi.shape[0])
    return sol.pi * z + epsilon * sol.eta(z) * pts
