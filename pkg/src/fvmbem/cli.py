"""Command line interface.

    fvmbem converge tanh --levels 4
    fvmbem snapshots transport --times 0.25 0.5 1
    fvmbem selftest

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

import argparse
import logging
import sys

from .coupling import NumericalError
from .experiments import ConfigError, RunConfig, read_config, run_convergence, run_snapshots
from .mesh import MeshError
from .problems import PROBLEMS


def _common(p):
    p.add_argument("problem", choices=sorted(PROBLEMS))
    p.add_argument("--config", help="key = value file; command line flags take precedence")
    p.add_argument("--method", choices=("variant", "classical"))
    p.add_argument("--upwind", choices=("none", "full", "steerable"))
    p.add_argument("--upwind-norm", dest="upwind_norm", choices=("max_entry", "row_sum"))
    p.add_argument("--h0", type=float)
    p.add_argument("--tau0", type=float)
    p.add_argument("-T", dest="T", type=float)
    p.add_argument("--alpha-threshold", dest="alpha_threshold", type=float)
    p.add_argument("--out", dest="out_dir")
    p.add_argument("--no-plots", dest="plots", action="store_const", const=False)


def build_parser():
    parser = argparse.ArgumentParser(prog="fvmbem", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    conv = sub.add_parser("converge", help="convergence study with CSV output")
    _common(conv)
    conv.add_argument("--levels", type=int)
    snap = sub.add_parser("snapshots", help="VTK snapshots of one run")
    _common(snap)
    snap.add_argument("--times", type=float, nargs="+")
    sub.add_parser("selftest", help="run the quick oracle checks")
    return parser


def _config(args):
    cfg = RunConfig(problem=args.problem)
    if args.config:
        cfg.update(read_config(args.config))
    flags = {k: getattr(args, k, None) for k in
             ("method", "upwind", "upwind_norm", "h0", "tau0", "T", "alpha_threshold",
              "out_dir", "plots", "levels", "times")}
    cfg.update({k: v for k, v in flags.items() if v is not None})
    cfg.problem = args.problem
    return cfg.validate()


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        if args.command == "selftest":
            from .selftest import run_selftest
            return 0 if run_selftest() else 2
        cfg = _config(args)
        problem = cfg.build_problem()
        scheme = cfg.scheme(problem)
        if args.command == "converge":
            report = run_convergence(problem, cfg.levels, cfg.h0, cfg.tau0, cfg.method,
                                     scheme, cfg.out_dir, cfg.plots)
            for row in report.table():
                print(",".join("nan" if v is None else f"{v:.6g}" for v in row))
        else:
            _, paths = run_snapshots(problem, cfg.h0, cfg.tau0, cfg.times, cfg.out_dir,
                                     cfg.method, scheme, cfg.plots)
            for p in paths:
                print(p)
    except (ConfigError, MeshError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # non-finite data or solutions surface as ValueError from the assemblers
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
