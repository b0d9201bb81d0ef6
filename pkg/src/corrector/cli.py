"""Command-line front end.

    corrector solve <config|preset> [--out DIR] [--check] [--seed N] [--mode M]
    corrector presets
    corrector oracle1d --sigma S --alpha A --l01 X --l10 Y

Exit codes: 0 success, 1 failed invariant check, 2 configuration error,
3 solver error, 4 output error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__, presets
from .checks import CheckResult, check_discounted_bounds, run_invariants
from .config import ExperimentConfig, load
from .errors import ConfigError, CorrectorError, InapplicableStructure, OutputError
from .grid import CorrectorProblem, make_problem
from .market import (
    MarketParams,
    effective_diffusion,
    map_nt_region,
    solve_merton,
    with_corrector,
)
from .montecarlo import mc_allowance, mc_ergodic_cost
from .oracles import separable_from_problem, solve_1d_closed_form
from .regions import classify_regions, emit_csv, emit_image
from .solver import (
    CorrectorSolution,
    SolverOptions,
    binding_mask,
    solve_discounted,
    solve_policy_iteration,
)

log = logging.getLogger("corrector")

EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 1, 2, 3, 4


@dataclass
class RunResult:
    status: int
    summary: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    solution: CorrectorSolution | None = None


def build_problem(cfg: ExperimentConfig):
    """Market parameters, Merton solution and the discrete corrector problem."""
    m, c, s = cfg.market, cfg.corrector, cfg.solver
    params = MarketParams(
        mu=np.array(m.mu), r=m.r, sigma=np.array(m.sigma), beta=m.beta, p=m.p,
        lam=np.array(m.lam), epsilon=m.epsilon,
    )
    merton = solve_merton(params)
    d = params.d
    sigma_eff = {
        "market": params.sigma,
        "identity": np.eye(d),
        "matrix": np.array(c.sigma_matrix, dtype=float) if c.sigma_matrix else None,
    }[c.sigma]
    if c.alpha == "merton":
        alpha_bar = effective_diffusion(merton, params, floor=c.diffusion_floor)
    elif c.alpha == "sigma":
        alpha_bar = sigma_eff
    elif c.alpha == "identity":
        alpha_bar = np.eye(d)
    else:
        alpha_bar = np.array(c.alpha_matrix, dtype=float)
    radius = "auto" if s.radius == "auto" else float(s.radius)
    problem = make_problem(
        sigma_eff, alpha_bar, params.lam, s.n, radius=radius, margin=s.margin,
        min_radius=s.min_radius, cost_convention=s.cost_convention,
    )
    return params, merton, problem


def solver_options(cfg: ExperimentConfig) -> SolverOptions:
    s = cfg.solver
    return SolverOptions(
        tol_switch=s.tol_switch, tol_a_rel=s.tol_a_rel, tol_bind=s.tol_bind,
        max_iters=s.max_iters, backend=s.backend, band=s.band,
    )


def _as_solution(dsol, opts: SolverOptions) -> CorrectorSolution:
    """View a discounted solution as an ergodic one (``w - w(0)``, ``a = eta min w``)."""
    problem = dsol.problem
    w = dsol.w - dsol.w[problem.center]
    tol_bind = opts.binding_tol(problem)
    return CorrectorSolution(
        problem=problem, w=w, a_bar=dsol.a_estimate, policy=dsol.policy,
        binding=binding_mask(w, problem, tol_bind), iterations=dsol.iterations,
        residual_norm=dsol.residual_norm, tol_bind=tol_bind, a_history=[dsol.a_estimate],
    )


def oracle_comparison(problem: CorrectorProblem, a_bar: float) -> dict:
    out = {}
    try:
        sep = separable_from_problem(problem)
    except InapplicableStructure:
        return out
    out["oracle_a_bar"] = sep.a_hat
    if sep.a_hat > 0:
        out["oracle_rel_error"] = abs(a_bar - sep.a_hat) / sep.a_hat
    out["oracle_nt_half_widths"] = " ".join(f"{ax.rho_plus:.10g}" for ax in sep.axes)
    return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def write_summary(path: Path, summary: dict, checks: list[CheckResult]) -> None:
    lines = [f"{k} = {_fmt(v)}" for k, v in summary.items()]
    if checks:
        lines.append("")
        lines += [c.line() for c in checks]
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def run(cfg: ExperimentConfig, out_dir=None, check: bool = False) -> RunResult:
    """Solve, classify and emit artifacts; returns the exit status and summary."""
    out = Path(out_dir or cfg.output.directory)
    result = RunResult(status=0)
    summary = result.summary
    summary["experiment"] = cfg.name
    try:
        params, merton, problem = build_problem(cfg)
        opts = solver_options(cfg)
        summary.update(
            d=problem.d, n=problem.n, radius=problem.radius, h=problem.h,
            merton_pi=" ".join(f"{x:.10g}" for x in merton.pi), merton_c0=merton.c0,
        )
        mode = cfg.solver.mode
        solution = None
        if mode in ("policy-iteration", "both"):
            t0 = time.perf_counter()
            solution = solve_policy_iteration(problem, opts)
            log.info("policy iteration: %.2fs", time.perf_counter() - t0)
            summary.update(
                a_bar=solution.a_bar, iterations=solution.iterations,
                residual_norm=solution.residual_norm, tol_bind=solution.tol_bind,
                neumann_nodes=solution.neumann_nodes,
            )
        dsol = None
        if mode in ("discounted", "both"):
            dsol = solve_discounted(problem, cfg.solver.eta, opts)
            summary.update(
                eta=dsol.eta, a_estimate=dsol.a_estimate,
                discounted_iterations=dsol.iterations,
                discounted_residual_norm=dsol.residual_norm,
            )
            if solution is None:
                solution = _as_solution(dsol, opts)
                summary.update(tol_bind=solution.tol_bind)
            else:
                summary["a_rel_difference"] = abs(dsol.a_estimate - solution.a_bar) / max(
                    abs(solution.a_bar), 1e-300
                )
        result.solution = solution
        corr = with_corrector(merton, max(solution.a_bar, 0.0))
        summary["u0"] = corr.u0
        summary.update(oracle_comparison(problem, solution.a_bar))

        rmap = classify_regions(solution)
        summary["nt_nodes"] = int(rmap.nt_mask.sum())
        summary["nt_components"] = rmap.nt_components
        if rmap.degenerate:
            summary["degenerate"] = "all costs zero; no-trade everywhere"
        if cfg.market.epsilon > 0 and rmap.nt_mask.any():
            pts = problem.coords[rmap.nt_mask]
            y = map_nt_region(merton, cfg.market.wealth, cfg.market.epsilon, pts)
            summary["nt_positions_min"] = " ".join(f"{x:.10g}" for x in y.min(axis=0))
            summary["nt_positions_max"] = " ".join(f"{x:.10g}" for x in y.max(axis=0))

        v = cfg.validation
        if v.mc:
            est, se = mc_ergodic_cost(
                solution, problem, T=v.horizon, dt=v.dt, seed=v.seed, n_paths=v.paths
            )
            allowance = mc_allowance(solution, v.dt)
            summary.update(
                mc_estimate=est, mc_stderr=se, mc_allowance=allowance,
                mc_rel_error=abs(est - solution.a_bar) / max(abs(solution.a_bar), 1e-300),
            )

        if check:
            result.checks = run_invariants(solution, opts)
            if dsol is not None:
                result.checks.append(check_discounted_bounds(dsol))
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        result.status = EXIT_CONFIG
        return result
    except OutputError as exc:
        log.error("output error: %s", exc)
        result.status = EXIT_IO
        return result
    except CorrectorError as exc:
        log.error("solver error: %s: %s", type(exc).__name__, exc)
        result.status = EXIT_SOLVER
        return result

    try:
        out.mkdir(parents=True, exist_ok=True)
        if cfg.output.csv:
            result.artifacts.append(emit_csv(rmap, out / "regions.csv"))
        if cfg.output.image and problem.d == 2:
            result.artifacts.append(emit_image(rmap, out / "regions.ppm", cfg.output.scale))
        write_summary(out / "summary.txt", summary, result.checks)
        result.artifacts.append(out / "summary.txt")
    except (OutputError, OSError) as exc:
        log.error("output error: %s", exc)
        result.status = EXIT_IO
        return result

    if any(not c.ok for c in result.checks):
        for c in result.checks:
            if not c.ok:
                log.error("%s", c.line())
        result.status = EXIT_CHECK
    return result


# argument handling


def _cmd_solve(args) -> int:
    try:
        cfg = load(args.config)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg = replace(cfg, validation=replace(cfg.validation, seed=args.seed))
    if args.mode is not None:
        cfg = replace(cfg, solver=replace(cfg.solver, mode=args.mode))
    res = run(cfg, args.out, check=args.check)
    if res.status in (0, EXIT_CHECK):
        for k in ("a_bar", "a_estimate", "iterations", "oracle_rel_error", "mc_estimate"):
            if k in res.summary:
                print(f"{k} = {_fmt(res.summary[k])}")
        for c in res.checks:
            print(c.line())
        for a in res.artifacts:
            print(f"wrote {a}")
    return res.status


def _cmd_presets(args) -> int:
    sys.stdout.write(presets.list_presets())
    return 0


def _cmd_oracle1d(args) -> int:
    try:
        sol = solve_1d_closed_form(args.sigma, args.alpha, args.l01, args.l10)
    except CorrectorError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    print(f"rho_plus = {sol.rho_plus:.12g}")
    print(f"a_bar = {sol.a_bar:.12g}")
    print(f"slope_shift = {sol.slope_shift:.12g}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="corrector", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a preset or config file")
    s.add_argument("config", help="preset name or path to a config file")
    s.add_argument("--out", help="output directory (overrides [output] directory)")
    s.add_argument("--check", action="store_true", help="run the invariant suite")
    s.add_argument("--seed", type=int, help="Monte-Carlo seed")
    s.add_argument("--mode", choices=["policy-iteration", "discounted", "both"])
    s.set_defaults(func=_cmd_solve)

    p = sub.add_parser("presets", help="list built-in experiments")
    p.set_defaults(func=_cmd_presets)

    o = sub.add_parser("oracle1d", help="one-dimensional closed form")
    o.add_argument("--sigma", type=float, required=True)
    o.add_argument("--alpha", type=float, required=True)
    o.add_argument("--l01", type=float, required=True)
    o.add_argument("--l10", type=float, required=True)
    o.set_defaults(func=_cmd_oracle1d)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
