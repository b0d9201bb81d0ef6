"""Howard policy iteration for the discrete first corrector equation.

Every node carries one action.  A diffusing node satisfies

    a_bar - L_h w(rho) - |S rho|^2 / 2 = 0

with ``L_h`` the monotone generator, a transferring node ``(i, j)`` satisfies
``w(rho) - w(rho + h d_ij) = h lam_ij``, and ``w(0) = 0`` closes the system
for the unknowns ``(w, a_bar)``.  The discounted variant replaces ``a_bar`` by
``eta w(rho)`` and drops the normalisation row.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse import csgraph

from .errors import (
    DomainTooSmall,
    LinearSolveFailure,
    MaxItersExceeded,
    SingularSystem,
)
from .grid import DIFFUSE, NEUMANN, CorrectorProblem, PolicyField

log = logging.getLogger(__name__)

DIRECT_LIMIT = 200_000
DISCOUNT_RISE_TOL = 1e-9


@dataclass
class SolverOptions:
    tol_switch: float = 1e-10
    tol_a_rel: float = 1e-9
    tol_bind: float | None = None
    max_iters: int = 200
    backend: str = "auto"  # auto | direct | krylov
    band: int = 2
    check_domain: bool = True

    def tol_a(self, a_bar: float) -> float:
        return self.tol_a_rel * max(1.0, abs(a_bar))

    def binding_tol(self, problem: CorrectorProblem) -> float:
        if self.tol_bind is not None:
            return self.tol_bind
        return max(10 * self.tol_switch, problem.h * problem.lam_max * 1e-3)


@dataclass
class CorrectorSolution:
    problem: CorrectorProblem
    w: np.ndarray
    a_bar: float
    policy: PolicyField
    binding: np.ndarray  # (npairs,) + shape
    iterations: int
    residual_norm: float
    tol_bind: float
    a_history: list = field(default_factory=list)
    neumann_nodes: int = 0

    @property
    def binding_sets(self) -> np.ndarray:
        """Object array of per-node frozensets of binding ordered pairs."""
        pairs = self.problem.pairs
        out = np.empty(self.problem.shape, dtype=object)
        for idx in np.ndindex(self.problem.shape):
            out[idx] = frozenset(p for k, p in enumerate(pairs) if self.binding[(k,) + idx])
        return out

    @property
    def nt_mask(self) -> np.ndarray:
        return ~self.binding.any(axis=0)


# linear algebra


def _solve_sparse(A: sp.csr_matrix, b: np.ndarray, backend: str) -> np.ndarray:
    if backend == "auto":
        backend = "direct" if A.shape[0] <= DIRECT_LIMIT else "krylov"
    if backend == "direct":
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            try:
                x = spla.spsolve(A.tocsc(), b)
            except (spla.MatrixRankWarning, RuntimeError) as exc:
                raise SingularSystem(f"policy system is singular: {exc}") from exc
    elif backend == "krylov":
        try:
            ilu = spla.spilu(A.tocsc(), drop_tol=1e-6, fill_factor=20)
        except RuntimeError as exc:
            raise SingularSystem(f"incomplete factorisation failed: {exc}") from exc
        M = spla.LinearOperator(A.shape, ilu.solve)
        x, info = spla.bicgstab(A, b, M=M, rtol=1e-13, atol=0.0, maxiter=5000)
        if info != 0:
            raise LinearSolveFailure(f"BiCGSTAB did not converge (info={info})")
    else:
        raise ValueError(f"unknown backend {backend!r}")
    if not np.all(np.isfinite(x)):
        raise SingularSystem("policy system is singular (non-finite solution)")
    return x


def _assemble(problem: CorrectorProblem, policy: PolicyField, eta: float | None):
    """Sparse system for a fixed policy; ``eta is None`` means the ergodic form."""
    N = problem.size
    acts = policy.actions.ravel()
    nodes = np.arange(N)
    f = problem.running_cost.ravel()
    rows, cols, vals = [], [], []
    rhs = np.zeros(N + (eta is None))

    diff = nodes[acts == DIFFUSE]
    if diff.size:
        centre = 0.0
        for off, c in problem.stencil:
            rows.append(diff)
            cols.append(diff + problem.flat_offset(off))
            vals.append(np.full(diff.size, -c))
            centre += c
        rows.append(diff)
        cols.append(diff)
        vals.append(np.full(diff.size, centre + (eta or 0.0)))
        if eta is None:
            rows.append(diff)
            cols.append(np.full(diff.size, N))
            vals.append(np.ones(diff.size))
        rhs[diff] = f[diff]

    for k, off in enumerate(problem.offsets):
        tr = nodes[acts == k]
        if not tr.size:
            continue
        fo = problem.flat_offset(off)
        rows += [tr, tr]
        cols += [tr, tr + fo]
        vals += [np.ones(tr.size), -np.ones(tr.size)]
        rhs[tr] = problem.h * problem.pair_costs[k]

    neu = nodes[acts == NEUMANN]
    if neu.size:
        rows += [neu, neu]
        cols += [neu, problem.neumann_target.ravel()[neu]]
        vals += [np.ones(neu.size), -np.ones(neu.size)]

    if eta is None:
        rows.append(np.array([N]))
        cols.append(np.array([problem.center_flat]))
        vals.append(np.array([1.0]))
    M = N + (eta is None)
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(M, M)
    )
    return A, rhs


def evaluate_policy(
    policy: PolicyField, problem: CorrectorProblem, backend: str = "auto"
) -> tuple[np.ndarray, float]:
    """Solve the linear system of a fixed policy for ``(w, a_bar)``."""
    if not np.any(policy.actions == DIFFUSE):
        raise SingularSystem("policy has no diffusing node")
    A, rhs = _assemble(problem, policy, None)
    x = _solve_sparse(A, rhs, backend)
    res = np.abs(A @ x - rhs).max()
    scale = max(1.0, np.abs(rhs).max())
    if res > 1e-8 * scale:
        raise LinearSolveFailure(f"re-substitution residual {res:.3e}")
    w = x[:-1].reshape(problem.shape)
    w -= w[problem.center]  # exact normalisation
    return w, float(x[-1])


def evaluate_policy_discounted(
    policy: PolicyField, problem: CorrectorProblem, eta: float, backend: str = "auto"
) -> np.ndarray:
    A, rhs = _assemble(problem, policy, eta)
    x = _solve_sparse(A, rhs, backend)
    res = np.abs(A @ x - rhs).max()
    if res > 1e-8 * max(1.0, np.abs(rhs).max(), np.abs(x).max() * eta):
        raise LinearSolveFailure(f"re-substitution residual {res:.3e}")
    return x.reshape(problem.shape)


# policy improvement


def initial_policy(problem: CorrectorProblem) -> PolicyField:
    """Diffuse inside, most-inward admissible transfer on the boundary."""
    acts = np.full(problem.shape, DIFFUSE, dtype=np.int64)
    bmask = problem.boundary_mask
    adm = problem.boundary_admissible
    idx = problem.index_grid
    c = (problem.n - 1) // 2
    score = np.full((len(problem.pairs),) + problem.shape, np.inf)
    for k, off in enumerate(problem.offsets):
        t = np.clip(idx + off, 0, problem.n - 1)
        nb = np.sum((t == 0) | (t == problem.n - 1), axis=-1)
        l1 = np.sum(np.abs(t - c), axis=-1)
        score[k] = np.where(adm[k], nb * (problem.d * problem.n + 1) + l1, np.inf)
    if len(problem.pairs):
        best = np.argmin(score, axis=0)
        has = np.isfinite(np.min(score, axis=0))
    else:
        best = np.zeros(problem.shape, dtype=np.int64)
        has = np.zeros(problem.shape, dtype=bool)
    acts[bmask & has] = best[bmask & has]
    acts[bmask & ~has] = NEUMANN
    return PolicyField(actions=acts, pairs=tuple(problem.pairs))


def zero_cost_policy(problem: CorrectorProblem) -> PolicyField:
    """Free-transfer policy: every node moves toward the origin along a shortest transfer path.

    With all finite costs zero this is optimal (``a_bar = 0``, ``w = 0``);
    nodes that cannot reach the origin diffuse, or fall back to Neumann on the boundary.
    """
    N = problem.size
    nodes = np.arange(N)
    idx = problem.index_grid.reshape(N, problem.d)
    src, dst = [], []
    for k, off in enumerate(problem.offsets):
        t = idx + off
        ok = np.all((t >= 0) & (t < problem.n), axis=1)
        src.append(nodes[ok])
        dst.append(nodes[ok] + problem.flat_offset(off))
    src, dst = np.concatenate(src), np.concatenate(dst)
    G = sp.csr_matrix((np.ones(src.size), (dst, src)), shape=(N, N))  # reversed moves
    dist = csgraph.shortest_path(G, unweighted=True, indices=problem.center_flat)
    acts = np.full(N, DIFFUSE, dtype=np.int64)
    for k, off in reversed(list(enumerate(problem.offsets))):
        t = idx + off
        ok = np.all((t >= 0) & (t < problem.n), axis=1)
        tgt = np.where(ok, nodes + problem.flat_offset(off), 0)
        better = ok & np.isfinite(dist) & (dist[tgt] == dist - 1)
        acts[better] = k  # reversed loop: the lexicographically first pair wins
    acts = acts.reshape(problem.shape)
    stuck = problem.boundary_mask & (acts == DIFFUSE)
    acts[stuck] = NEUMANN
    return PolicyField(actions=acts, pairs=tuple(problem.pairs))


def diffusion_residual(
    w: np.ndarray, a_bar: float, problem: CorrectorProblem, eta: float | None = None
) -> np.ndarray:
    """Value of the diffusion branch; NaN on the boundary.

    Ergodic form ``a_bar - L_h w - f``; discounted form ``eta w - L_h w - f``.
    """
    lead = a_bar if eta is None else eta * w
    return lead - problem.generator_field(w) - problem.running_cost


def _first_within(values: np.ndarray, best: np.ndarray, tol: float) -> np.ndarray:
    """Index of the first entry along axis 0 that is within ``tol`` of ``best``."""
    close = values >= best[None] - tol
    return np.argmax(close, axis=0)


def improve_policy(
    w: np.ndarray,
    problem: CorrectorProblem,
    a_bar: float = 0.0,
    tol_switch: float = 1e-10,
    eta: float | None = None,
    previous: PolicyField | None = None,
) -> PolicyField:
    """Greedy update of the per-node action.

    Interior: transfer along the pair with the largest residual if it is
    positive; with a residual that is zero up to ``tol_switch`` a transfer is
    also kept when diffusing is strictly worse (discounted form: whenever the
    transfer residual exceeds the diffusion residual).  Otherwise diffuse.  Boundary
    nodes pick the best inward transfer (Neumann surrogate if none exists).
    Ties resolve to the lexicographically smallest pair.
    """
    npairs = len(problem.pairs)
    bmask = problem.boundary_mask
    acts = np.full(problem.shape, DIFFUSE, dtype=np.int64)
    if npairs == 0:
        acts[bmask] = NEUMANN
        return PolicyField(actions=acts, pairs=())

    r = problem.transfer_residuals(w)
    g = diffusion_residual(w, a_bar, problem, eta)

    r_int = np.where(problem.target_in_grid, r, -np.inf)
    rmax = r_int.max(axis=0)
    choice = _first_within(r_int, rmax, tol_switch)
    if eta is None:
        # a_bar is free in the ergodic form, so only the sign of r is meaningful
        transfer = (rmax > tol_switch) | ((rmax >= -tol_switch) & (g < -tol_switch))
    else:
        # argmax over the branches: this keeps active transfers whose residual
        # carries round-off below -tol when diffusing is clearly worse
        transfer = (rmax > tol_switch) | (rmax > g + tol_switch)
    inner = ~bmask
    acts[inner & transfer] = choice[inner & transfer]

    r_bd = np.where(problem.boundary_admissible, r, -np.inf)
    bmax = r_bd.max(axis=0)
    bchoice = _first_within(r_bd, bmax, tol_switch)
    has = np.isfinite(bmax)
    acts[bmask & has] = bchoice[bmask & has]
    acts[bmask & ~has] = NEUMANN

    if previous is not None:
        # keep the current action when it is as good as the greedy one
        prev = previous.actions
        idx = np.clip(prev, 0, npairs - 1)
        r_prev = np.take_along_axis(r, idx[None], axis=0)[0]
        keep_tr = (prev >= 0) & (acts >= 0) & (r_prev >= np.where(bmask, bmax, rmax) - tol_switch)
        keep_tr &= np.where(bmask, problem.boundary_admissible.any(axis=0), True)
        acts[keep_tr] = prev[keep_tr]

    acts = _break_cycles(acts, problem, previous)
    if previous is not None:
        acts = _ensure_unichain(acts, problem, previous.actions)
    return PolicyField(actions=acts, pairs=tuple(problem.pairs))


def chain_graph(acts: np.ndarray, problem: CorrectorProblem) -> sp.csr_matrix:
    """Directed transition graph of the controlled chain under a policy."""
    flat = acts.ravel()
    N = flat.size
    nodes = np.arange(N)
    src, dst = [], []
    diff = nodes[flat == DIFFUSE]
    for off, c in problem.stencil:
        src.append(diff)
        dst.append(diff + problem.flat_offset(off))
    for k, off in enumerate(problem.offsets):
        tr = nodes[flat == k]
        src.append(tr)
        dst.append(tr + problem.flat_offset(off))
    neu = nodes[flat == NEUMANN]
    src.append(neu)
    dst.append(problem.neumann_target.ravel()[neu])
    src, dst = np.concatenate(src), np.concatenate(dst)
    return sp.csr_matrix((np.ones(src.size), (src, dst)), shape=(N, N))


def closed_classes(acts: np.ndarray, problem: CorrectorProblem) -> tuple[np.ndarray, list[int]]:
    """Strong components of the chain and the labels of the closed (recurrent) ones."""
    G = chain_graph(acts, problem).tocoo()
    ncomp, labels = csgraph.connected_components(G, directed=True, connection="strong")
    leaves = labels[G.row] != labels[G.col]
    open_ = np.zeros(ncomp, dtype=bool)
    open_[labels[G.row[leaves]]] = True
    return labels, [c for c in range(ncomp) if not open_[c]]


def _ensure_unichain(acts: np.ndarray, problem: CorrectorProblem, prev: np.ndarray) -> np.ndarray:
    """Revert updates that would split the chain into several recurrent classes.

    The ergodic system is only solvable for a single recurrent class; stray
    classes (those not holding the centre node, or the smaller ones) get their
    previous actions back.
    """
    acts = acts.copy()
    centre = problem.center_flat
    for _ in range(50):
        labels, closed = closed_classes(acts, problem)
        if len(closed) <= 1:
            return acts
        sizes = {c: int(np.sum(labels == c)) for c in closed}
        main = labels[centre] if labels[centre] in sizes else max(sizes, key=sizes.get)
        flat = acts.ravel()
        stray = np.isin(labels, [c for c in closed if c != main])
        changed = stray & (flat != prev.ravel())
        if not changed.any():
            break
        flat[changed] = prev.ravel()[changed]
        acts = flat.reshape(acts.shape)
    return acts


def _break_cycles(acts: np.ndarray, problem: CorrectorProblem, previous) -> np.ndarray:
    """Revert transfer cycles (possible only through zero-cost ties) to diffusion."""
    flat = acts.ravel().copy()
    N = flat.size
    nxt = np.arange(N)
    for k, off in enumerate(problem.offsets):
        sel = flat == k
        nxt[sel] = np.flatnonzero(sel) + problem.flat_offset(off)
    is_transfer = flat >= 0
    # iterate pointer doubling: nodes still on transfer chains after N hops sit on cycles
    ptr = np.where(is_transfer, nxt, np.arange(N))
    hops = 1
    while hops < N:
        ptr = ptr[ptr]
        hops *= 2
    on_cycle = is_transfer & (flat[ptr] >= 0)
    if not on_cycle.any():
        return acts
    bmask = problem.boundary_mask.ravel()
    prev = previous.actions.ravel() if previous is not None else None
    for node in np.flatnonzero(on_cycle):
        if not bmask[node]:
            flat[node] = DIFFUSE if prev is None or prev[node] < 0 else prev[node]
    return flat.reshape(acts.shape)


# drivers


def binding_mask(w: np.ndarray, problem: CorrectorProblem, tol_bind: float) -> np.ndarray:
    r = problem.transfer_residuals(w)
    return np.abs(r) <= tol_bind


def discrete_residual(
    w: np.ndarray, a_bar: float, policy: PolicyField, problem: CorrectorProblem, eta=None
) -> float:
    """Max of |diffusion residual| on diffusing nodes and positive constraint violations."""
    g = diffusion_residual(w, a_bar, problem, eta)
    diff = policy.actions == DIFFUSE
    r = problem.transfer_residuals(w)
    viol = np.where(problem.target_in_grid, np.maximum(r, 0.0), 0.0)
    parts = [viol.max() if viol.size else 0.0]
    if diff.any():
        parts.append(np.abs(g[diff]).max())
    return float(max(parts))


def _check_band(binding: np.ndarray, problem: CorrectorProblem, band: int):
    idx = problem.index_grid
    dist = np.min(np.minimum(idx, problem.n - 1 - idx), axis=-1)
    near = dist <= band
    bound = binding.any(axis=0)
    if not np.all(bound[near]):
        raise DomainTooSmall(
            f"no binding constraint at {int(np.sum(near & ~bound))} nodes within "
            f"{band} cells of the boundary; increase the radius (R={problem.radius:.4g})"
        )


def solve_policy_iteration(
    problem: CorrectorProblem, opts: SolverOptions | None = None
) -> CorrectorSolution:
    opts = opts or SolverOptions()
    history: list[float] = []
    a_prev = None
    if len(problem.pairs) and problem.lam_max == 0.0:
        # free transfers: the origin-seeking policy attains the lower bound a_bar = 0
        policy = zero_cost_policy(problem)
        w, a_bar = evaluate_policy(policy, problem, opts.backend)
        history.append(a_bar)
        it = 1
        return _finish(problem, opts, w, a_bar, policy, it, history, check_domain=False)
    policy = initial_policy(problem)
    for it in range(1, opts.max_iters + 1):
        w, a_bar = evaluate_policy(policy, problem, opts.backend)
        history.append(a_bar)
        new = improve_policy(w, problem, a_bar, opts.tol_switch, previous=policy)
        changed = int(np.sum(new.actions != policy.actions))
        log.debug("iteration %d: a_bar=%.12g, %d actions changed", it, a_bar, changed)
        if changed == 0 and (a_prev is None or abs(a_bar - a_prev) < opts.tol_a(a_bar)):
            break
        if changed == 0:
            # same policy re-evaluates to the same value
            break
        a_prev = a_bar
        policy = new
    else:
        raise MaxItersExceeded(f"policy iteration did not converge in {opts.max_iters} iterations")
    return _finish(problem, opts, w, a_bar, policy, it, history, opts.check_domain)


def _finish(problem, opts, w, a_bar, policy, it, history, check_domain) -> CorrectorSolution:
    tol_bind = opts.binding_tol(problem)
    binding = binding_mask(w, problem, tol_bind)
    if check_domain and len(problem.pairs):
        _check_band(binding, problem, opts.band)
    return CorrectorSolution(
        problem=problem,
        w=w,
        a_bar=a_bar,
        policy=policy,
        binding=binding,
        iterations=it,
        residual_norm=discrete_residual(w, a_bar, policy, problem),
        tol_bind=tol_bind,
        a_history=history,
        neumann_nodes=int(np.sum(policy.actions == NEUMANN)),
    )


@dataclass
class DiscountedSolution:
    problem: CorrectorProblem
    eta: float
    w: np.ndarray
    a_estimate: float
    policy: PolicyField
    iterations: int
    residual_norm: float


def solve_discounted(
    problem: CorrectorProblem, eta: float, opts: SolverOptions | None = None
) -> DiscountedSolution:
    """Policy iteration for the discounted equation ``max{eta w - L w - f, r_ij} = 0``."""
    if not eta > 0:
        raise ValueError("discount must be positive")
    opts = opts or SolverOptions()
    if len(problem.pairs) and problem.lam_max == 0.0:
        # free transfers to the origin give w = 0, the smallest possible value
        policy = zero_cost_policy(problem)
        w = evaluate_policy_discounted(policy, problem, eta, opts.backend)
        return DiscountedSolution(
            problem=problem, eta=eta, w=w, a_estimate=float(eta * w.min()), policy=policy,
            iterations=1, residual_norm=discrete_residual(w, 0.0, policy, problem, eta=eta),
        )
    policy = initial_policy(problem)
    w = evaluate_policy_discounted(policy, problem, eta, opts.backend)
    for it in range(1, opts.max_iters + 1):
        new = improve_policy(w, problem, 0.0, opts.tol_switch, eta=eta, previous=policy)
        if new == policy:
            break
        w_new = evaluate_policy_discounted(new, problem, eta, opts.backend)
        # exact Howard steps never raise w; a rise means the remaining switches are
        # round-off ties (the system is ill-conditioned as eta -> 0), so stop here
        if np.max(w_new - w) > DISCOUNT_RISE_TOL * max(1.0, float(np.abs(w).max())):
            break
        policy, w = new, w_new
    else:
        raise MaxItersExceeded(f"discounted iteration did not converge in {opts.max_iters}")
    a_est = float(eta * w.min())
    return DiscountedSolution(
        problem=problem,
        eta=eta,
        w=w,
        a_estimate=a_est,
        policy=policy,
        iterations=it,
        residual_norm=discrete_residual(w, 0.0, policy, problem, eta=eta),
    )
