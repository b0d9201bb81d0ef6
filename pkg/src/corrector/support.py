"""Support function of the admissible-gradient polytope.

The polytope is ``C = {u in R^d : u_i - u_j <= lam[i, j]}`` over all allowed
pairs, with the convention ``u_0 = 0`` for the cash account.  Single queries go
through a small dense simplex (Bland's rule, so it cannot cycle); grid-wide
evaluation uses the enumerated vertex set.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .errors import UnboundedDirection
from .market import finite_pairs

_EPS = 1e-12


def constraint_rows(lam: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``a`` and bounds ``b`` with ``C = {u : a @ u <= b}``."""
    d = lam.shape[0] - 1
    rows, rhs = [], []
    for i, j in finite_pairs(lam):
        a = np.zeros(d)
        if i > 0:
            a[i - 1] += 1.0
        if j > 0:
            a[j - 1] -= 1.0
        rows.append(a)
        rhs.append(lam[i, j])
    return np.array(rows).reshape(-1, d), np.array(rhs)


def simplex_max(c: np.ndarray, A: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """Maximise ``c @ x`` over ``A x <= b, x >= 0`` for ``b >= 0``.

    Dense tableau with Bland's anti-cycling rule.  Raises
    :class:`UnboundedDirection` when the objective is unbounded.
    """
    m, n = A.shape
    if np.any(b < 0):
        raise ValueError("origin must be feasible (b >= 0)")
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = list(range(n, n + m))
    for _ in range(10_000):
        entering = next((k for k in range(n + m) if T[m, k] < -_EPS), None)
        if entering is None:
            break
        col = T[:m, entering]
        candidates = [
            (T[r, -1] / col[r], basis[r], r) for r in range(m) if col[r] > _EPS
        ]
        if not candidates:
            raise UnboundedDirection("support function is infinite in this direction")
        _, _, row = min(candidates)
        T[row] /= T[row, entering]
        for r in range(m + 1):
            if r != row and T[r, entering] != 0.0:
                T[r] -= T[r, entering] * T[row]
        basis[row] = entering
    else:  # pragma: no cover - Bland's rule terminates
        raise RuntimeError("simplex did not terminate")
    x = np.zeros(n + m)
    for r, k in enumerate(basis):
        x[k] = T[r, -1]
    return float(T[m, -1]), x[:n]


def delta_C(rho, lam: np.ndarray) -> float:
    """Support function ``sup {u . rho : u in C}`` solved as a linear program."""
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if not np.any(rho):
        return 0.0
    A, b = constraint_rows(lam)
    # free variables u = x+ - x-
    val, _ = simplex_max(np.concatenate([rho, -rho]), np.hstack([A, -A]), b)
    return val


def is_bounded(lam: np.ndarray) -> bool:
    d = lam.shape[0] - 1
    try:
        for k in range(d):
            for s in (1.0, -1.0):
                delta_C(s * np.eye(d)[k], lam)
    except UnboundedDirection:
        return False
    return True


def polytope_vertices(lam: np.ndarray) -> np.ndarray:
    """Vertices of a bounded ``C`` by enumerating active constraint sets."""
    return _vertices_cached(lam.shape[0], tuple(np.asarray(lam, dtype=float).ravel()))


@lru_cache(maxsize=64)
def _vertices_cached(m: int, flat: tuple) -> np.ndarray:
    lam = np.array(flat).reshape(m, m)
    A, b = constraint_rows(lam)
    d = m - 1
    verts = []
    for subset in itertools.combinations(range(A.shape[0]), d):
        S = list(subset)
        As = A[S]
        if abs(np.linalg.det(As)) < 1e-12:
            continue
        u = np.linalg.solve(As, b[S])
        if np.all(A @ u <= b + 1e-12 * (1 + np.abs(b))):
            if not any(np.allclose(u, v, atol=1e-14) for v in verts):
                verts.append(u)
    return np.array(verts).reshape(-1, d)


def delta_C_many(points, lam: np.ndarray) -> np.ndarray:
    """Vectorised support function on an ``(..., d)`` array of points (bounded ``C`` only)."""
    pts = np.asarray(points, dtype=float)
    V = polytope_vertices(lam)
    return np.max(pts @ V.T, axis=-1)


def max_gradient_norm(lam: np.ndarray) -> float:
    """Largest Euclidean norm of an element of ``C`` (Lipschitz bound of ``delta_C``)."""
    V = polytope_vertices(lam)
    return float(np.linalg.norm(V, axis=1).max())
