"""Monte-Carlo estimate of the ergodic cost of a computed trading policy.

The fast variable diffuses as ``d rho = alphaBar dB``.  Whenever the nearest
grid node lies outside the no-trade set, the grid policy's transfer is applied
in steps of ``h`` (each step costs ``lam_ij h``) until the state is back
inside.  The time average of ``|S rho|^2 / 2`` plus the transfer costs is an
upper estimate of ``a_bar`` up to discretisation error.

Paths are independent; every path draws from its own generator spawned from
the seed, so results do not depend on how paths are grouped or threaded.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import NoNTRegion, NonConvergence
from .grid import CorrectorProblem

BLOCK_STEPS = 1000
MAX_PUSHES = 10_000
MAX_ESCAPE_FRACTION = 1e-3


def worker_count(limit: int | None = None) -> int:
    """Thread count, capped by ``CORRECTOR_THREADS`` and the CPU count."""
    n = os.cpu_count() or 1
    env = os.environ.get("CORRECTOR_THREADS")
    if env:
        try:
            n = min(n, max(1, int(env)))
        except ValueError:
            pass
    if limit is not None:
        n = min(n, limit)
    return max(1, n)


def _simulate(
    problem: CorrectorProblem,
    nt: np.ndarray,
    actions: np.ndarray,
    alpha_bar: np.ndarray,
    rho0: np.ndarray,
    gens: list,
    steps: int,
    dt: float,
    warm: int = 0,
):
    """Per-path accumulated cost and the number of grid escapes."""
    P, d = len(gens), problem.d
    h, R, n = problem.h, problem.radius, problem.n
    offsets = problem.offsets * h
    costs = problem.pair_costs * h
    rho = np.tile(rho0, (P, 1))
    total = np.zeros(P)
    escapes = 0
    sq = np.sqrt(dt)
    done = 0
    steps += warm
    while done < steps:
        k = min(BLOCK_STEPS, steps - done)
        xi = np.stack([g.standard_normal((k, d)) for g in gens], axis=1)  # (k, P, d)
        incr = sq * xi @ alpha_bar.T
        for s in range(k):
            if done + s == warm:
                total[:] = 0.0
            # left-point rule for the running cost
            total += problem.running_cost_at(rho) * dt
            rho += incr[s]
            for _ in range(MAX_PUSHES):
                idx = np.rint((rho + R) / h).astype(np.int64)
                out = np.any((idx < 0) | (idx >= n), axis=1)
                if out.any():
                    escapes += int(out.sum())
                    rho[out] = np.clip(rho[out], -R, R)
                    idx[out] = np.clip(idx[out], 0, n - 1)
                key = tuple(idx.T)
                act = actions[key]
                push = ~nt[key] & (act >= 0)
                if not push.any():
                    break
                a = act[push]
                rho[push] += offsets[a]
                total[push] += costs[a]
            else:
                raise NonConvergence("transfer chain did not return to the no-trade set")
        done += k
    return total, escapes


def mc_ergodic_cost(
    solution,
    problem: CorrectorProblem | None = None,
    T: float = 2e4,
    dt: float = 1e-3,
    seed: int = 0,
    n_paths: int = 4000,
    rho0=None,
    alpha_bar=None,
) -> tuple[float, float]:
    """Time-averaged cost of the grid policy over ``n_paths`` paths of total horizon ``T``.

    ``alpha_bar`` overrides the simulated diffusion (it may be singular).
    Returns the estimate and its standard error over per-path averages.
    """
    problem = problem or solution.problem
    nt = solution.nt_mask
    if not nt[problem.center]:
        raise NoNTRegion("the no-trade set does not contain the origin")
    if n_paths < 2:
        raise ValueError("need at least two paths for a standard error")
    rho0 = np.zeros(problem.d) if rho0 is None else np.atleast_1d(np.asarray(rho0, dtype=float))
    ab = problem.alpha_bar if alpha_bar is None else np.atleast_2d(np.asarray(alpha_bar, float))
    steps = max(1, int(round(T / (n_paths * dt))))
    warm = _warm_steps(problem, nt, ab, dt)
    gens = [np.random.Generator(np.random.Philox(s)) for s in np.random.SeedSequence(seed).spawn(n_paths)]

    workers = worker_count(n_paths)
    groups = np.array_split(np.arange(n_paths), workers)
    args = (problem, nt, solution.policy.actions, ab, rho0)
    if workers == 1:
        results = [_simulate(*args, gens, steps, dt, warm)]
    else:
        with ThreadPoolExecutor(workers) as pool:
            futs = [
                pool.submit(_simulate, *args, [gens[i] for i in g], steps, dt, warm)
                for g in groups
            ]
            results = [f.result() for f in futs]
    totals = np.concatenate([r[0] for r in results])
    escapes = sum(r[1] for r in results)
    if escapes > MAX_ESCAPE_FRACTION * steps * n_paths:
        raise NonConvergence(f"state left the grid {escapes} times; enlarge the radius")
    means = totals / (steps * dt)
    return float(means.mean()), float(means.std(ddof=1) / np.sqrt(n_paths))


def _warm_steps(problem, nt, ab, dt) -> int:
    """Burn-in long enough to forget the starting point: ten diffusion times across the NT set."""
    lam_min = float(np.linalg.eigvalsh(ab @ ab.T).min())
    if lam_min <= 0.0:
        return 0
    extent = float(np.linalg.norm(problem.coords[nt], axis=-1).max())
    return int(np.ceil(10.0 * extent**2 / (lam_min * dt)))


def mc_allowance(solution, dt: float) -> float:
    """Discretisation allowance ``C (h + sqrt(dt))`` for the lower bound check.

    ``C = a_bar / r_in`` with ``r_in`` the distance from the origin to the
    nearest node outside the no-trade set, i.e. the typical slope of the
    cost with respect to a displacement of the reflecting boundary.
    """
    problem = solution.problem
    out = ~solution.nt_mask
    if not out.any():
        return 0.0
    r_in = float(np.linalg.norm(problem.coords[out], axis=-1).min())
    return abs(solution.a_bar) / max(r_in, problem.h) * (problem.h + np.sqrt(dt))
