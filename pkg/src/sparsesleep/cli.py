"""Command line entry point: ``sparsesleep {solve,sweep,validate,generate}``.

Exit codes: 0 success, 1 validation check failed, 2 infeasible instance,
3 solver failure, 4 bad configuration or input file.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

from sparsesleep import formats, harness, validation
from sparsesleep.config import load_config
from sparsesleep.errors import ConfigError, InfeasibleError, InvalidInputError, SolverError

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INFEASIBLE = 2
EXIT_SOLVER = 3
EXIT_CONFIG = 4

log = logging.getLogger("sparsesleep")


def _float_list(text):
    try:
        values = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="base seed (overrides scenario.seed)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="sparsesleep",
                                description="Base station sleep scheduling by reweighted LP.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="solve one snapshot and write its trace")
    s.add_argument("--topology", metavar="PATH", help="read stations from a text file")
    s.add_argument("--users", metavar="PATH", help="read users from a text file")

    w = sub.add_parser("sweep", parents=[common], help="all solvers over load levels and realizations")
    w.add_argument("--lambda-list", type=_float_list, metavar="LIST",
                   help="mean user counts, comma separated")
    w.add_argument("--realizations", type=int)
    w.add_argument("--enable-bruteforce", action="store_true",
                   help="also run the exhaustive optimum on small instances")
    w.add_argument("--jobs", type=int, help="worker processes")

    v = sub.add_parser("validate", parents=[common], help="run the invariant checks")
    v.add_argument("--tolerance-scale", type=float, default=1.0,
                   help="multiply every check threshold by this factor")
    v.add_argument("--quick", action="store_true", help="fewer random samples")
    v.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)

    g = sub.add_parser("generate", parents=[common], help="write a scenario to text files")
    g.add_argument("--realization", type=int, default=0)
    return p


def _resolve_config(args):
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["scenario.seed"] = args.seed
    if args.out is not None:
        changes["output_dir"] = args.out
    if getattr(args, "lambda_list", None):
        changes["scenario.mean_users_list"] = args.lambda_list
    if getattr(args, "realizations", None) is not None:
        changes["realizations"] = args.realizations
    if getattr(args, "enable_bruteforce", False):
        changes["enable_bruteforce"] = True
    if getattr(args, "jobs", None) is not None:
        changes["jobs"] = args.jobs
    return cfg.replace(**changes) if changes else cfg


def _run(args) -> int:
    cfg = _resolve_config(args)
    if args.command == "solve":
        topology = formats.read_topology(args.topology) if args.topology else None
        users = formats.read_users(args.users)[0] if args.users else None
        result = harness.cmd_solve(cfg, topology=topology, users=users)
        print(f"active stations: {result.energy.active_count}  "
              f"energy: {result.energy.total_power_w:g} W  "
              f"iterations: {result.trace.iterations_used} ({result.trace.termination_reason})")
        return EXIT_OK
    if args.command == "sweep":
        result = harness.cmd_sweep(cfg)
        for s in result.summary:
            print(f"mean users {s['mean_users']:g}: "
                  + "  ".join(f"{n} {s[f'{n}_active_mean']:.2f}" for n in harness.SOLVERS
                              if not math.isnan(s[f"{n}_active_mean"])))
        return EXIT_OK
    if args.command == "validate":
        results = validation.run_all(seed=cfg.scenario.seed, tolerance_scale=args.tolerance_scale,
                                     corrupt_gradient=args.corrupt_gradient, quick=args.quick)
        for r in results:
            print(r.line())
        return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED
    if args.command == "generate":
        topology, users = harness.cmd_generate(cfg, realization=args.realization)
        print(f"{topology.num_stations} stations, {users.num_users} users -> {cfg.output_dir}")
        return EXIT_OK
    raise AssertionError(args.command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except (ConfigError, InvalidInputError, OSError) as exc:
        log.error("configuration or input error: %s", exc)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        log.error("infeasible: %s", exc)
        return EXIT_INFEASIBLE
    except SolverError as exc:
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
