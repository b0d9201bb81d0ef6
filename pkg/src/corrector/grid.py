"""Discrete first-corrector problem on a uniform cube ``[-R, R]^d``.

Fields are numpy arrays of shape ``(n,) * d`` with ``ij`` indexing; node
``k`` along an axis sits at ``-R + k h``.  Transfers from asset ``i`` to asset
``j`` move the fast variable by ``e_j - e_i`` (``e_0 = 0``), one grid step at a
time.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DegenerateDiffusion, InvalidParameters, StencilOutOfDomain
from .market import as_cost_matrix, finite_pairs
from .oracles import solve_1d_closed_form

DIFFUSE = -1
NEUMANN = -2

DEFAULT_MARGIN = 3.0
DEFAULT_MIN_RADIUS = 1e-3
DEFAULT_DIFFUSION_FLOOR = 1e-10


class NonMonotoneStencil(UserWarning):
    pass


def default_radius(sigma, alpha_bar, lam, margin=DEFAULT_MARGIN, min_radius=DEFAULT_MIN_RADIUS):
    """Half-width of the computational cube from the separable upper-bound problem.

    Uses the closed-form 1D boundary with ``c1 = max eig(sigma sigma^T)``,
    ``c2 = max eig(alphaBar alphaBar^T)`` and both one-way costs equal to ``2 lam_max``.
    """
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    alpha_bar = np.atleast_2d(np.asarray(alpha_bar, dtype=float))
    lam = np.asarray(lam, dtype=float)
    finite = lam[np.isfinite(lam)]
    lam_max = float(finite.max()) if finite.size else 0.0
    if lam_max <= 0.0:
        return float(min_radius)
    c1 = float(np.linalg.eigvalsh(sigma @ sigma.T).max())
    c2 = float(np.linalg.eigvalsh(alpha_bar @ alpha_bar.T).max())
    bound = solve_1d_closed_form(np.sqrt(c1), np.sqrt(c2), 2 * lam_max, 2 * lam_max)
    return max(margin * bound.rho_plus, float(min_radius))


def generator_stencil(A: np.ndarray, h: float) -> list[tuple[tuple[int, ...], float]]:
    """Neighbour offsets and weights of the monotone discretisation of ``1/2 Tr(A D^2 w)``.

    Cross derivatives use the corner pair aligned with the sign of ``A[i, j]``;
    the centre weight is minus the sum of the returned weights.
    """
    d = A.shape[0]
    eye = np.eye(d, dtype=int)
    weights: dict[tuple[int, ...], float] = {}

    def add(off, c):
        key = tuple(int(x) for x in off)
        weights[key] = weights.get(key, 0.0) + c

    for i in range(d):
        for s in (1, -1):
            add(s * eye[i], 0.5 * A[i, i] / h**2)
    for i in range(d):
        for j in range(i + 1, d):
            a = A[i, j]
            if a == 0.0:
                continue
            corner = eye[i] + eye[j] if a > 0 else eye[i] - eye[j]
            for s in (1, -1):
                add(s * corner, 0.5 * abs(a) / h**2)
                add(s * eye[i], -0.5 * abs(a) / h**2)
                add(s * eye[j], -0.5 * abs(a) / h**2)
    return [(k, v) for k, v in weights.items() if v != 0.0]


def is_diagonally_dominant(A: np.ndarray) -> bool:
    off = np.abs(A).sum(axis=1) - np.abs(np.diag(A))
    return bool(np.all(np.diag(A) - off >= -1e-14))


def shifted(w: np.ndarray, offset, fill=np.nan) -> np.ndarray:
    """``out[idx] = w[idx + offset]`` with ``fill`` where the target leaves the grid."""
    out = np.full(w.shape, fill, dtype=np.result_type(w.dtype, type(fill)))
    src, dst = [], []
    for o, n in zip(offset, w.shape):
        if o >= 0:
            src.append(slice(o, n))
            dst.append(slice(0, n - o))
        else:
            src.append(slice(0, n + o))
            dst.append(slice(-o, n))
    out[tuple(dst)] = w[tuple(src)]
    return out


@dataclass(frozen=True)
class CorrectorProblem:
    sigma_eff: np.ndarray
    alpha_bar: np.ndarray
    lam: np.ndarray
    radius: float
    n: int
    cost_convention: str = "sigma"
    diffusion_floor: float = DEFAULT_DIFFUSION_FLOOR
    d: int = field(init=False)

    def __post_init__(self):
        sig = np.atleast_2d(np.asarray(self.sigma_eff, dtype=float))
        ab = np.atleast_2d(np.asarray(self.alpha_bar, dtype=float))
        d = sig.shape[0]
        object.__setattr__(self, "sigma_eff", sig)
        object.__setattr__(self, "alpha_bar", ab)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "lam", as_cost_matrix(self.lam, d))
        if sig.shape != (d, d) or ab.shape != (d, d):
            raise InvalidParameters("sigma and alphaBar must be square of the same size")
        if not 1 <= d <= 3:
            raise InvalidParameters(f"dimension {d} not supported (1 <= d <= 3)")
        if self.n < 5 or self.n % 2 == 0:
            raise InvalidParameters(f"node count must be odd and >= 5, got {self.n}")
        if not self.radius > 0:
            raise InvalidParameters("radius must be positive")
        if self.cost_convention not in ("sigma", "sigmaT"):
            raise InvalidParameters("cost convention must be 'sigma' or 'sigmaT'")
        smallest = float(np.linalg.eigvalsh(self.diffusion).min())
        if smallest < self.diffusion_floor:
            raise DegenerateDiffusion(
                f"smallest eigenvalue of alphaBar alphaBar^T is {smallest:.3e}"
            )
        from .support import is_bounded  # local import: support -> market only

        if not is_bounded(self.lam):
            raise InvalidParameters("admissible-gradient polytope is unbounded")
        if not is_diagonally_dominant(self.diffusion):
            warnings.warn(
                "alphaBar alphaBar^T is not diagonally dominant; stencil is not monotone",
                NonMonotoneStencil,
                stacklevel=4,
            )

    # geometry

    @property
    def h(self) -> float:
        return 2.0 * self.radius / (self.n - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def center(self) -> tuple[int, ...]:
        return ((self.n - 1) // 2,) * self.d

    @property
    def center_flat(self) -> int:
        return int(np.ravel_multi_index(self.center, self.shape))

    @cached_property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.radius, self.radius, self.n)

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``shape + (d,)``."""
        mesh = np.meshgrid(*([self.axis] * self.d), indexing="ij")
        return np.stack(mesh, axis=-1)

    @cached_property
    def index_grid(self) -> np.ndarray:
        mesh = np.meshgrid(*([np.arange(self.n)] * self.d), indexing="ij")
        return np.stack(mesh, axis=-1)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        idx = self.index_grid
        return np.any((idx == 0) | (idx == self.n - 1), axis=-1)

    @property
    def monotone(self) -> bool:
        return is_diagonally_dominant(self.diffusion)

    # coefficients

    @cached_property
    def diffusion(self) -> np.ndarray:
        return self.alpha_bar @ self.alpha_bar.T

    @cached_property
    def cost_matrix(self) -> np.ndarray:
        return self.sigma_eff if self.cost_convention == "sigma" else self.sigma_eff.T

    @cached_property
    def running_cost(self) -> np.ndarray:
        """``|S rho|^2 / 2`` at every node."""
        v = self.coords @ self.cost_matrix.T
        return 0.5 * np.sum(v**2, axis=-1)

    def running_cost_at(self, rho) -> np.ndarray:
        v = np.asarray(rho, dtype=float) @ self.cost_matrix.T
        return 0.5 * np.sum(v**2, axis=-1)

    @cached_property
    def stencil(self) -> list[tuple[tuple[int, ...], float]]:
        return generator_stencil(self.diffusion, self.h)

    @cached_property
    def pairs(self) -> list[tuple[int, int]]:
        return finite_pairs(self.lam)

    @cached_property
    def pair_costs(self) -> np.ndarray:
        return np.array([self.lam[i, j] for i, j in self.pairs])

    @cached_property
    def offsets(self) -> np.ndarray:
        """Grid offset ``e_j - e_i`` of each allowed transfer, shape ``(npairs, d)``."""
        out = np.zeros((len(self.pairs), self.d), dtype=int)
        for k, (i, j) in enumerate(self.pairs):
            if j > 0:
                out[k, j - 1] += 1
            if i > 0:
                out[k, i - 1] -= 1
        return out

    @cached_property
    def strides(self) -> np.ndarray:
        return np.array([self.n ** (self.d - 1 - k) for k in range(self.d)], dtype=np.int64)

    def flat_offset(self, offset) -> int:
        return int(np.dot(offset, self.strides))

    @cached_property
    def lam_max(self) -> float:
        return float(self.pair_costs.max()) if len(self.pairs) else 0.0

    # boundary handling

    @cached_property
    def target_in_grid(self) -> np.ndarray:
        """``(npairs,) + shape`` mask: transfer target is a grid node."""
        idx = self.index_grid
        out = np.empty((len(self.pairs),) + self.shape, dtype=bool)
        for k, off in enumerate(self.offsets):
            t = idx + off
            out[k] = np.all((t >= 0) & (t < self.n), axis=-1)
        return out

    @cached_property
    def boundary_admissible(self) -> np.ndarray:
        """Transfers a boundary node may use: target in grid and strictly inward.

        Inward means the target has fewer boundary coordinates, or as many but a
        smaller index distance to the centre; this order rules out transfer cycles
        among boundary nodes.
        """
        idx = self.index_grid
        c = (self.n - 1) // 2
        nb = np.sum((idx == 0) | (idx == self.n - 1), axis=-1)
        l1 = np.sum(np.abs(idx - c), axis=-1)
        out = np.zeros((len(self.pairs),) + self.shape, dtype=bool)
        for k, off in enumerate(self.offsets):
            t = idx + off
            ok = np.all((t >= 0) & (t < self.n), axis=-1)
            tc = np.clip(t, 0, self.n - 1)
            tnb = np.sum((tc == 0) | (tc == self.n - 1), axis=-1)
            tl1 = np.sum(np.abs(tc - c), axis=-1)
            out[k] = ok & ((tnb < nb) | ((tnb == nb) & (tl1 < l1)))
        out &= self.boundary_mask
        return out

    @cached_property
    def neumann_target(self) -> np.ndarray:
        """Flat index of the nearest interior node (used by the Neumann surrogate)."""
        idx = np.clip(self.index_grid, 1, self.n - 2)
        return np.ravel_multi_index(tuple(np.moveaxis(idx, -1, 0)), self.shape)

    # node-level operators

    def _check_node(self, node):
        node = tuple(int(k) for k in np.atleast_1d(node))
        if len(node) != self.d or any(k < 0 or k >= self.n for k in node):
            raise StencilOutOfDomain(f"node {node} outside the grid")
        return node

    def apply_generator(self, w: np.ndarray, node) -> float:
        node = self._check_node(node)
        if any(k == 0 or k == self.n - 1 for k in node):
            raise StencilOutOfDomain(f"diffusion stencil at {node} leaves the grid")
        centre = w[node]
        total = 0.0
        for off, c in self.stencil:
            total += c * (w[tuple(np.add(node, off))] - centre)
        return float(total)

    def transfer_residual(self, w: np.ndarray, node, pair) -> float:
        node = self._check_node(node)
        k = self.pairs.index(tuple(pair)) if tuple(pair) in self.pairs else None
        if k is None:
            raise StencilOutOfDomain(f"transfer {pair} is not allowed")
        target = tuple(np.add(node, self.offsets[k]))
        if any(t < 0 or t >= self.n for t in target):
            raise StencilOutOfDomain(f"transfer {pair} from {node} leaves the grid")
        return float((w[node] - w[target]) / self.h - self.pair_costs[k])

    # field-level operators

    def generator_field(self, w: np.ndarray) -> np.ndarray:
        """Discrete generator at every node; NaN on the boundary."""
        out = np.zeros(self.shape)
        for off, c in self.stencil:
            out += c * (shifted(w, off) - w)
        out[self.boundary_mask] = np.nan
        return out

    def transfer_residuals(self, w: np.ndarray) -> np.ndarray:
        """``(npairs,) + shape`` array of transfer residuals, ``-inf`` off-grid."""
        out = np.empty((len(self.pairs),) + self.shape)
        for k, off in enumerate(self.offsets):
            r = (w - shifted(w, off)) / self.h - self.pair_costs[k]
            out[k] = np.where(np.isnan(r), -np.inf, r)
        return out


def make_problem(
    sigma,
    alpha_bar,
    lam,
    n: int,
    radius="auto",
    margin: float = DEFAULT_MARGIN,
    min_radius: float = DEFAULT_MIN_RADIUS,
    cost_convention: str = "sigma",
) -> CorrectorProblem:
    if radius in (None, "auto"):
        radius = default_radius(sigma, alpha_bar, lam, margin=margin, min_radius=min_radius)
    return CorrectorProblem(
        sigma_eff=sigma,
        alpha_bar=alpha_bar,
        lam=lam,
        radius=float(radius),
        n=int(n),
        cost_convention=cost_convention,
    )


@dataclass(frozen=True)
class PolicyField:
    """Per-node action codes: ``DIFFUSE``, ``NEUMANN`` or an index into ``pairs``."""

    actions: np.ndarray
    pairs: tuple

    def action_at(self, node):
        a = int(self.actions[tuple(node)])
        if a == DIFFUSE:
            return "diffuse"
        if a == NEUMANN:
            return "neumann"
        return self.pairs[a]

    def __eq__(self, other):
        return isinstance(other, PolicyField) and np.array_equal(self.actions, other.actions)

    __hash__ = None
