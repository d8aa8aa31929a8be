"""Command-line surface.

Subcommands: solve, sweep, verify, oracle, kernel-check.  Each accepts
--config <path> (JSON) plus flag overrides; exit code 0 on success, 2 on
assertion failure, 3 on solver non-convergence outside expect-failure mode.
Thread count comes from the QCURV_THREADS environment variable only.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .curvature import (CurvatureProfile, K_constant, K_one_minus,
                        K_one_plus, K_regularized, thresholds_for)
from .diagnostics import diagnose, pohozaev_check
from .experiments import (EXPERIMENT_KINDS, ExperimentConfig, run_experiment,
                          run_kernel_validation, crosscheck_record)
from .radial import make_grid
from .shooting import shoot
from .solver import SolutionRecord, SolveSpec, solve

EXIT_OK = 0
EXIT_ASSERTION = 2
EXIT_NO_CONVERGENCE = 3


def _load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _profile_from(args, cfg) -> CurvatureProfile:
    kind = args.kind or cfg.get("kind", "one_minus_rp")
    p = args.p if args.p is not None else cfg.get("p", 2.0)
    if kind == "one_minus_rp":
        return K_one_minus(p, eps=cfg.get("eps", 0.0))
    if kind == "one_plus_rp":
        return K_one_plus(p, eps=cfg.get("eps", 0.0))
    if kind == "constant":
        return K_constant(cfg.get("K0", 6.0))
    if kind == "regularized_lambda":
        return K_regularized(cfg.get("lam", 1.0), p,
                             eps=cfg.get("eps", 1.0))
    raise SystemExit(f"unknown profile kind {kind!r}")


def _grid_from(args, cfg):
    return make_grid(args.rmax or cfg.get("r_max", 1e3),
                     args.nodes or cfg.get("n_nodes", 1200),
                     args.rmin or cfg.get("r_min", 1e-5))


def _add_common(sp):
    sp.add_argument("--config", default=None, help="JSON config file")
    sp.add_argument("--p", type=float, default=None)
    sp.add_argument("--rmax", type=float, default=None)
    sp.add_argument("--nodes", type=int, default=None)
    sp.add_argument("--rmin", type=float, default=None)
    sp.add_argument("--out", default=None)


def cmd_solve(args) -> int:
    cfg = _load_config(args.config)
    prof = _profile_from(args, cfg)
    grid = _grid_from(args, cfg)
    if args.Lambda is not None:
        spec = SolveSpec(prof, "lambda", args.Lambda,
                         expect_failure=args.expect_failure)
    elif args.rho is not None:
        spec = SolveSpec(prof, "rho", args.rho,
                         expect_failure=args.expect_failure)
    else:
        raise SystemExit("need --Lambda or --rho")
    rec = solve(spec, grid=grid)
    rep = diagnose(rec) if rec.converged else None
    print(f"converged={rec.converged} iterations={rec.iterations} "
          f"residual={rec.residual_norm:.3e}")
    print(f"Lambda={rec.lam:.8f} u(0)={rec.u.values[0]:.8f} c={rec.c:.8f} "
          f"window={rec.window_check}")
    if rep is not None:
        print(f"pohozaev_residual={rep.pohozaev_residual:.3e} "
              f"slope_fit={rep.slope_fit:.6f} "
              f"slope_target={rep.slope_target:.6f}")
    if args.out:
        rec.save(args.out)
        print(f"wrote {args.out}")
    if not rec.converged and not spec.expect_failure:
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg_dict = _load_config(args.config)
    kind = args.experiment or cfg_dict.get("experiment")
    if kind not in EXPERIMENT_KINDS:
        raise SystemExit(f"--experiment must be one of {EXPERIMENT_KINDS}")
    cfg = ExperimentConfig(
        kind=kind,
        p=args.p if args.p is not None else cfg_dict.get("p", 2.0),
        lambdas=([args.Lambda] if args.Lambda is not None
                 else cfg_dict.get("lambdas")),
        rhos=([args.rho] if args.rho is not None else cfg_dict.get("rhos")),
        r_max=args.rmax or cfg_dict.get("r_max", 1e3),
        n_nodes=args.nodes or cfg_dict.get("n_nodes", 1200),
        r_min=args.rmin or cfg_dict.get("r_min", 1e-5),
        seed=cfg_dict.get("seed", 0),
        pohozaev_tol=cfg_dict.get("pohozaev_tol", 0.01),
        out=args.out or cfg_dict.get("out"),
        extra=cfg_dict.get("extra", {}))
    res = run_experiment(cfg)
    print(f"experiment={kind} hash={cfg.hash()} passed={res.passed}")
    for key, val in res.summary.items():
        print(f"  {key} = {val}")
    if cfg.out:
        print(f"wrote {cfg.out}")
    if not res.passed:
        any_solver_failure = any(not r.get("converged", True)
                                 for r in res.rows)
        if kind != "nonexistence_probe" and any_solver_failure:
            return EXIT_NO_CONVERGENCE
        return EXIT_ASSERTION
    return EXIT_OK


def cmd_verify(args) -> int:
    rec = SolutionRecord.load(args.record)
    rep = diagnose(rec)
    print(f"record: constraint={rec.spec.constraint} "
          f"target={rec.spec.target} Lambda={rec.lam:.6f} "
          f"converged={rec.converged}")
    print(f"pohozaev: lhs={rep.pohozaev_lhs:.6f} rhs={rep.pohozaev_rhs:.6f} "
          f"residual={rep.pohozaev_residual:.3e} "
          f"applicable={rep.identity_applicable}")
    print(f"slope: fit={rep.slope_fit:.6f} target={rep.slope_target:.6f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rep.to_json_dict(), fh, indent=1)
    if not rec.converged:
        return EXIT_NO_CONVERGENCE
    if rep.identity_applicable and rep.pohozaev_residual > args.tol:
        print(f"FAIL: identity residual above {args.tol}")
        return EXIT_ASSERTION
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _load_config(args.config)
    if args.record:
        rec = SolutionRecord.load(args.record)
        out = crosscheck_record(rec)
        print(f"crosscheck: max_dev={out['max_dev']:.3e} "
              f"class={out['terminal_class']} b={out['b']:.6f}")
        return EXIT_OK if out["max_dev"] <= args.tol else EXIT_ASSERTION
    prof = _profile_from(args, cfg)
    state = shoot(args.a, args.b, prof, r_end=args.r_end)
    print(f"terminal_class={state.terminal_class} r_exit={state.r_exit:.4f}")
    for key, val in state.diagnostics.items():
        print(f"  {key} = {val}")
    if args.out:
        state.to_csv(args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_kernel_check(args) -> int:
    cfg = ExperimentConfig("kernel_validation", out=args.out,
                           extra={"n": args.n})
    res = run_kernel_validation(cfg)
    print(f"max_abs_err={res.summary['max_abs_err']:.3e} over "
          f"{args.n}x{args.n} grid in {res.summary['runtime_s']:.2f}s")
    return EXIT_OK if res.passed else EXIT_ASSERTION


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qcurv",
        description="Radial solver for the fourth-order prescribed-curvature "
                    "equation on R^4")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="one solve with diagnostics")
    _add_common(sp)
    sp.add_argument("--kind", default=None,
                    choices=["one_minus_rp", "one_plus_rp", "constant",
                             "regularized_lambda"])
    sp.add_argument("--Lambda", type=float, default=None,
                    help="prescribed total curvature")
    sp.add_argument("--rho", type=float, default=None,
                    help="prescribed origin value")
    sp.add_argument("--expect-failure", action="store_true")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("sweep", help="batch experiment, JSON-lines output")
    _add_common(sp)
    sp.add_argument("--experiment", default=None, choices=EXPERIMENT_KINDS)
    sp.add_argument("--Lambda", type=float, default=None)
    sp.add_argument("--rho", type=float, default=None)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("verify", help="re-run diagnostics on a stored record")
    sp.add_argument("record")
    sp.add_argument("--tol", type=float, default=0.01)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("oracle", help="outward ODE integration / crosscheck")
    _add_common(sp)
    sp.add_argument("--kind", default=None,
                    choices=["one_minus_rp", "one_plus_rp", "constant",
                             "regularized_lambda"])
    sp.add_argument("--a", type=float, default=0.0, help="u(0)")
    sp.add_argument("--b", type=float, default=0.0, help="Delta u(0)")
    sp.add_argument("--r-end", type=float, default=1e3)
    sp.add_argument("--record", default=None,
                    help="cross-check a stored solution record")
    sp.add_argument("--tol", type=float, default=1e-3)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("kernel-check",
                        help="closed-form kernel vs quadrature oracle")
    sp.add_argument("--n", type=int, default=50)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_kernel_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
