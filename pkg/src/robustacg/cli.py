"""Command-line front end: ``robustacg <subcommand> [flags]``.

Exit status is 0 on success and 2 when a checkpoint assertion fails.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .bench import (ExperimentConfig, SOLVERS, _solve, convergence_probability,
                    opportunistic_study, paper_checkpoints, run_experiment)
from .models import PowerControlScenario, generate_scenarios, load_scenario, make_game
from .robust import UncertaintySpec
from .vi import analyze

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CHECK_FAILED = 2


def _eps_list(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad radius list {text!r}")
    if not vals or any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError("radii must be a nonempty list of nonnegative numbers")
    return vals


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # keep status 2 for failed checkpoints
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="robustacg", description=__doc__.splitlines()[0])
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base RNG seed")
    common.add_argument("--out-dir", help="directory for result files")
    common.add_argument("--scenario", help="JSON scenario file (default: generate one)")
    common.add_argument("--eps-list", type=_eps_list, default=[0.0, 0.1, 0.3, 0.5],
                        help="comma-separated relative uncertainty radii")
    common.add_argument("--solver", choices=SOLVERS, default="proximal")
    common.add_argument("--reps", type=_positive, default=None, help="repetitions / seeds")
    common.add_argument("--scale", type=float, default=1.0,
                        help="multiply the default repetition count")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("analyze", parents=[common], help="uniqueness report for a scenario")
    sub.add_parser("solve", parents=[common], help="one nominal/robust run with its trace")
    sw = sub.add_parser("sweep", parents=[common], help="seeded sweep over radii")
    sw.add_argument("--kind", choices=("power", "jackson", "opportunistic"), default="power")
    sw.add_argument("--regime", default="unique", help="power regime (unique, multi, ...)")
    jp = sub.add_parser("jackson-prob", parents=[common], help="convergence probability table")
    jp.add_argument("--deficits", type=_eps_list, default=[0.0, 0.1, 0.3, 0.5, 0.7, 0.9])
    sub.add_parser("checkpoints", parents=[common], help="recompute the printed example numbers")
    return p


def _reps(args, default):
    base = args.reps if args.reps is not None else default
    return max(1, int(round(base * args.scale)))


def _scenario(args):
    if args.scenario:
        return load_scenario(args.scenario)
    return generate_scenarios("power", {"n": 3, "k": 8, "regime": "unique", "count": 1},
                              args.seed)[0]


def _solve_config(args, scenario):
    kind = "power" if isinstance(scenario, PowerControlScenario) else "jackson"
    return ExperimentConfig(kind=kind, solver=args.solver, eps_list=args.eps_list, reps=1,
                            seed=args.seed, scenario_file=args.scenario)


def _emit(obj, args, name):
    text = json.dumps(obj, indent=1, default=_json_default)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
    print(text)


def _json_default(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    raise TypeError(f"not serialisable: {type(v).__name__}")


def cmd_analyze(args):
    scenario = _scenario(args)
    game = make_game(scenario)
    cfg = _solve_config(args, scenario)
    a_star = _solve(game, UncertaintySpec.none(game), cfg).final
    spec = UncertaintySpec.uniform(game, max(args.eps_list), relative=True)
    delta = spec.absolute(game, game.observations(a_star))
    _emit(analyze(game, delta=delta, a=a_star).as_dict(), args, "analysis.json")
    return EXIT_OK


def cmd_solve(args):
    scenario = _scenario(args)
    cfg = _solve_config(args, scenario)
    game = make_game(scenario)
    runs = {}
    for eps in args.eps_list:
        spec = UncertaintySpec.uniform(game, eps, relative=True)
        runs[str(eps)] = _solve(game, spec, cfg).as_dict()
    _emit({"config_hash": cfg.config_hash, "runs": runs}, args, "trace.json")
    return EXIT_OK


def cmd_sweep(args):
    if args.kind == "opportunistic":
        return _opportunistic_sweep(args)
    params = {"n": 3, "k": 8, "regime": args.regime} if args.kind == "power" else {"n": 5, "k": 3}
    cfg = ExperimentConfig(kind=args.kind, scenario_params=params, scenario_file=args.scenario,
                           solver=args.solver, eps_list=args.eps_list, reps=_reps(args, 100),
                           seed=args.seed, out_dir=args.out_dir)
    records = run_experiment(cfg)
    failed = sum(1 for r in records if r.error)
    print(f"{len(records)} records, {failed} failed runs, config {cfg.config_hash}")
    return EXIT_OK


def _opportunistic_sweep(args):
    seeds = [args.seed + i for i in range(_reps(args, 120))]
    rows = opportunistic_study(seeds, "high") + opportunistic_study(seeds, "moderate")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "opportunistic.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    for regime in ("high", "moderate"):
        etas = [r["eta"] for r in rows if r["regime"] == regime]
        print(f"{regime}: mean eta {np.mean(etas):.6g} over {len(etas)} seeds")
    return EXIT_OK


def cmd_jackson_prob(args):
    seeds = [args.seed + i for i in range(_reps(args, 50))]
    table = convergence_probability(seeds, args.deficits, args.eps_list)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "convergence_probability.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["routing_total", "eps", "probability"])
            w.writerows(table)
    for row in table:
        print("%.3f,%.3f,%.4f" % row)
    return EXIT_OK


def cmd_checkpoints(args):
    report = paper_checkpoints()
    for c in report["checks"]:
        mark = {True: "PASS", False: "FAIL", None: "REF "}[c["passed"]]
        print(f"{mark} {c['name']}: {c['value']} (expected {c['expected']}) {c['note']}".rstrip())
    if args.out_dir:
        _emit(report, args, "checkpoints.json")
    return EXIT_OK if report["passed"] else EXIT_CHECK_FAILED


COMMANDS = {"analyze": cmd_analyze, "solve": cmd_solve, "sweep": cmd_sweep,
            "jackson-prob": cmd_jackson_prob, "checkpoints": cmd_checkpoints}


def main(argv=None):
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
