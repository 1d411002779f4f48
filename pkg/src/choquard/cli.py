"""Command-line front end: ``choquard <command> ...``.

Commands
  classify      exponents, existence verdict and integrability class
  solve         run a solver from a JSON run configuration
  extremal      ``solve`` with mode forced to critical
  verify        energy report and residuals for a profile CSV
  hls-check     Monte Carlo presets (needs an explicit --seed)
  kernel-table  dump an assembled kernel matrix as CSV

Exit codes: 0 success, 2 invalid input, 3 solver did not converge.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import exponents as ex
from .energy import (
    energy_report,
    residual_critical,
    residual_subcritical,
)
from .errors import ChoquardError, InvalidParameters, NonexistenceRange, UncoveredRange
from .grid import RadialFunction, RadialGrid, read_profile, write_profile
from .kernel import assemble_kernel
from .solver import (
    FIXED_POINT,
    GRADIENT_FLOW,
    SolverConfig,
    decay_summary,
    solve_critical,
    solve_fixed_point,
    solve_subcritical,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NONCONVERGED = 3


class UsageError(Exception):
    pass


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# -- run configuration -----------------------------------------------------------

@dataclass
class RunConfig:
    problem: ex.ProblemParams
    grid: dict
    solver: SolverConfig
    mode: str = "subcritical"
    method: str = GRADIENT_FLOW
    init: Optional[str] = None
    outputs: dict = field(default_factory=dict)

    def make_grid(self) -> RadialGrid:
        g = self.grid
        r_max = float(g.get("r_max", 100.0))
        r_min = g.get("r_min")
        return RadialGrid(self.problem.N, float(r_min) if r_min is not None else 1e-4 * r_max,
                          r_max, int(g.get("n", 1024)))


def load_config(path: str, force_mode: Optional[str] = None) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError("cannot read config %s: %s" % (path, exc))
    if not isinstance(raw, dict) or "problem" not in raw:
        raise UsageError("config must be a JSON object with a 'problem' entry")
    mode = force_mode or raw.get("mode", "subcritical")
    if mode not in ("subcritical", "critical"):
        raise UsageError("mode must be 'subcritical' or 'critical'")
    pr = raw["problem"]
    try:
        p = pr.get("p")
        if mode == "critical":
            p = None
        elif p is None:
            raise UsageError("subcritical mode needs problem.p")
        params = ex.ProblemParams(int(pr["N"]), float(pr["alpha"]), float(pr["mu"]),
                                  None if p is None else float(p))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError("bad problem entry: %s" % exc)
    bad = ex.validate_params(ex.ProblemParams(params.N, params.alpha, params.mu))
    if bad:
        raise InvalidParameters(bad)
    if mode == "subcritical" and ex.existence_verdict(params) != ex.EXISTS:
        raise NonexistenceRange(
            "p = %g lies outside the existence range (%.6g, %.6g); the Pohozaev identity "
            "combined with the Nehari identity forces u = 0"
            % (params.p, ex.lower_critical(params.N, params.alpha, params.mu),
               ex.upper_critical(params.N, params.alpha, params.mu)))
    method = raw.get("method", GRADIENT_FLOW)
    if method not in (GRADIENT_FLOW, FIXED_POINT):
        raise UsageError("method must be %r or %r" % (GRADIENT_FLOW, FIXED_POINT))
    try:
        solver = SolverConfig(**raw.get("solver", {}))
    except TypeError as exc:
        raise UsageError("bad solver entry: %s" % exc)
    grid = raw.get("grid", {})
    cfg = RunConfig(params, grid, solver, mode, method, raw.get("init"), raw.get("outputs", {}))
    try:
        cfg.make_grid()
    except ValueError as exc:
        raise UsageError("bad grid entry: %s" % exc)
    return cfg


# -- commands -------------------------------------------------------------------

def cmd_classify(args) -> int:
    N, alpha, mu, p = args.N, args.alpha, args.mu, args.p
    params = ex.ProblemParams(N, alpha, mu, p)
    bad = ex.validate_params(ex.ProblemParams(N, alpha, mu))
    if bad:
        raise InvalidParameters(bad)
    out = {
        "params": params.to_dict(),
        "critical_exponents": {
            "upper": ex.upper_critical(N, alpha, mu),
            "lower": ex.lower_critical(N, alpha, mu),
        },
    }
    if p is not None:
        out["existence_verdict"] = ex.existence_verdict(params)
    try:
        rv = ex.regularity_class(N, alpha, mu)
        out.update({"regularity_case": rv.case_label,
                    "p_interval": list(rv.p_interval),
                    "q_interval": list(rv.q_interval)})
    except UncoveredRange as exc:
        out.update({"regularity_case": None, "p_interval": None, "q_interval": None,
                    "regularity_note": str(exc)})
    try:
        out["decay_constant"] = ex.decay_constant(N, alpha, mu)
        out["decay_exponent"] = ex.decay_exponent(N)
    except InvalidParameters:
        out["decay_constant"] = None
    print(_dumps(out))
    return EXIT_OK


def run_solve(cfg: RunConfig):
    grid = cfg.make_grid()
    params = cfg.problem
    K = assemble_kernel(params.N, params.mu, grid)
    init = cfg.init
    if cfg.method == FIXED_POINT:
        return solve_fixed_point(params, grid, K, cfg.solver, init)
    if cfg.mode == "critical":
        return solve_critical(params, grid, K, cfg.solver, init or "bubble")
    return solve_subcritical(params, grid, K, cfg.solver, init or "gaussian")


def cmd_solve(args, force_mode=None) -> int:
    cfg = load_config(args.config, force_mode)
    profile_path = args.profile or cfg.outputs.get("profile", "profile.csv")
    report_path = args.report or cfg.outputs.get("report", "report.json")
    u, rep = run_solve(cfg)
    write_profile(profile_path, u)
    doc = {
        "config": {
            "problem": cfg.problem.to_dict(),
            "grid": {"N": u.grid.N, "r_min": u.grid.r_min, "r_max": u.grid.r_max, "n": u.grid.n},
            "solver": cfg.solver.to_dict(),
            "mode": cfg.mode,
            "method": cfg.method,
        },
        "report": rep.to_dict(),
    }
    with open(report_path, "w") as fh:
        fh.write(_dumps(doc) + "\n")
    status = "converged" if rep.converged else "not converged"
    print("%s after %d iterations; residual %.3e" % (status, rep.iterations, rep.residual), file=sys.stderr)
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


def verify_profile(u: RadialFunction, cfg: RunConfig) -> dict:
    params = cfg.problem
    K = assemble_kernel(params.N, params.mu, u.grid)
    final = energy_report(u, params, K)
    if params.critical:
        _, weak = residual_critical(u, params, K)
    else:
        _, weak = residual_subcritical(u, params, K)
    out = {
        "mode": cfg.mode,
        "energy": final.to_dict(),
        "residual": weak,
        "decay": decay_summary(u, params),
    }
    if not params.critical:
        out["ground_state_ratio"] = {
            "measured": final.kinetic / final.mass if final.mass else None,
            "implied": -ex.pohozaev_coefficients(params)[1] / ex.pohozaev_coefficients(params)[0],
        }
    return out


def cmd_verify(args) -> int:
    cfg = load_config(args.config, args.mode)
    grid = cfg.make_grid()
    try:
        u = read_profile(args.profile, grid)
    except (OSError, ValueError) as exc:
        raise UsageError("cannot read profile: %s" % exc)
    print(_dumps(verify_profile(u, cfg)))
    return EXIT_OK


def cmd_hls_check(args) -> int:
    from . import hlslab as hl

    if args.samples < 1000:
        raise UsageError("--samples must be at least 1000")
    out = {"preset": args.preset, "samples": args.samples, "seed": args.seed}
    if args.preset == "gaussian":
        est = hl.mc_double_integral(hl.gaussian(), hl.gaussian(), 0.0, 0.0, 1.0, 3,
                                    args.samples, args.seed, workers=args.workers)
        exact = hl.gaussian_coulomb_exact()
        out.update({"estimate": est.to_dict(), "exact": exact,
                    "z": abs(est.value - exact) / est.stderr, "within_3_sigma": est.within(exact)})
    elif args.preset in ("bubble", "hls"):
        r = 6.0 / 5.0
        pairs = {
            "gaussian": hl.gaussian(),
            "bubble": hl.radial(lambda s: (1.0 + s * s) ** -2.5),
        }
        ratios = {k: hl.hls_ratio(f, f, r, r, 0.0, 0.0, 1.0, 3, args.samples, args.seed,
                                  workers=args.workers) for k, f in pairs.items()}
        out.update({"exponents": {"r": r, "s": r, "alpha": 0.0, "beta": 0.0, "mu": 1.0, "N": 3},
                    "ratios": ratios, "bubble_not_below_gaussian": ratios["bubble"] >= ratios["gaussian"]})
    elif args.preset == "bump":
        params = ex.ProblemParams(3, 0.25, 1.0)
        p = params.exponent
        f = lambda x: hl.bump()(x) ** p
        est = hl.mc_double_integral(f, f, 0.25, 0.25, 1.0, 3, args.samples, args.seed, scale=0.5,
                                    workers=args.workers)
        out.update({"params": params.to_dict(), "estimate": est.to_dict()})
    elif args.preset == "brezis-lieb":
        params = ex.ProblemParams(3, 0.25, 1.0)
        shifts = [args.shift] if args.shift is not None else [5.0, 10.0, 20.0]
        rows = [hl.brezis_lieb_split(hl.bump(), hl.bump(), R, params, args.samples, args.seed,
                                     workers=args.workers) for R in shifts]
        out.update({"params": params.to_dict(), "splits": rows,
                    "defect_below_0_05": rows[-1]["defect"] < 0.05})
    elif args.preset == "consistency":
        rows = hl.radial_consistency(args.samples, args.seed, workers=args.workers)
        out.update({"cases": rows, "passed": sum(r["pass"] for r in rows), "total": len(rows)})
    else:  # argparse restricts the choices
        raise UsageError("unknown preset %r" % args.preset)
    print(_dumps(out))
    return EXIT_OK


def cmd_kernel_table(args) -> int:
    if not (0 < args.mu < args.N):
        raise UsageError("need 0 < mu < N")
    r_min = args.r_min if args.r_min is not None else 1e-4 * args.r_max
    grid = RadialGrid(args.N, r_min, args.r_max, args.n)
    K = assemble_kernel(args.N, args.mu, grid)
    if args.out:
        with open(args.out, "w") as fh:
            K.dump_csv(fh)
    else:
        K.dump_csv(sys.stdout)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="choquard", description="Numerical lab for weighted Choquard equations")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", help="exponent bookkeeping for (N, alpha, mu[, p])")
    c.add_argument("--N", type=int, required=True)
    c.add_argument("--alpha", type=float, required=True)
    c.add_argument("--mu", type=float, required=True)
    c.add_argument("--p", type=float, default=None)
    c.set_defaults(func=cmd_classify)

    for name, mode in (("solve", None), ("extremal", "critical")):
        s = sub.add_parser(name, help="run a solver from a JSON config")
        s.add_argument("config")
        s.add_argument("--profile", help="output CSV (overrides outputs.profile)")
        s.add_argument("--report", help="output JSON (overrides outputs.report)")
        s.set_defaults(func=lambda a, m=mode: cmd_solve(a, m))

    v = sub.add_parser("verify", help="energy report and residuals for a profile")
    v.add_argument("profile")
    v.add_argument("config")
    v.add_argument("--mode", choices=["subcritical", "critical"], default=None)
    v.set_defaults(func=cmd_verify)

    h = sub.add_parser("hls-check", help="Monte Carlo Stein-Weiss presets")
    h.add_argument("--preset", choices=["gaussian", "bubble", "hls", "bump", "brezis-lieb", "consistency"],
                   default="gaussian")
    h.add_argument("--samples", type=int, default=1_000_000)
    h.add_argument("--seed", type=int, required=True)
    h.add_argument("--shift", type=float, default=None)
    h.add_argument("--workers", type=int, default=None)
    h.set_defaults(func=cmd_hls_check)

    k = sub.add_parser("kernel-table", help="dump the kernel matrix as CSV i,j,r_i,s_j,k")
    k.add_argument("--N", type=int, required=True)
    k.add_argument("--mu", type=float, required=True)
    k.add_argument("--n", type=int, default=64)
    k.add_argument("--r-max", type=float, default=100.0)
    k.add_argument("--r-min", type=float, default=None)
    k.add_argument("--out", default=None)
    k.set_defaults(func=cmd_kernel_table)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_INVALID
    try:
        return args.func(args)
    except InvalidParameters as exc:
        print("invalid parameters; violated constraints:", file=sys.stderr)
        for v in exc.violations:
            print("  " + v, file=sys.stderr)
        return EXIT_INVALID
    except (UsageError, NonexistenceRange, ChoquardError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
