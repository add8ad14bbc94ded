"""Command line entry point: ``bmmfa run|replay|lp|lb-instance|validate-matroid``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .. import adversary
from .. import matroid as mat
from ..benchmark import solve_pstar
from ..core import BmmfaError, RngHandle
from .config import ALPHA_STREAM, ConfigError, ExperimentConfig, build_instance, normalize_instance
from .experiment import ReplayError, dump_record, load_record, replay, run_experiment


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from None


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.no_plot:
        cfg.plot = False
    summary = run_experiment(cfg, args.out, args.threads)
    for label, block in summary.policies.items():
        for row in block["per_T"]:
            if row["n_runs"]:
                print(f"{label}\tT={row['T']}\truns={row['n_runs']}\t"
                      f"surrogate_regret_ub={row['surrogate_regret_ub_mean']!r}")
        if block["fit"]:
            print(f"{label}\tslope={block['fit']['slope']!r}\tstderr={block['fit']['slope_stderr']!r}")
    for failure in summary.failures:
        print(f"FAILED {failure}", file=sys.stderr)
    return 1 if summary.failures else 0


def cmd_replay(args) -> int:
    record = load_record(args.record)
    try:
        fresh = replay(record)
    except ReplayError as exc:
        print(f"replay refused: {exc}", file=sys.stderr)
        return 1
    if dump_record(fresh) != dump_record(record):
        print("replay mismatch", file=sys.stderr)
        return 1
    print("replay identical")
    return 0


def cmd_lp(args) -> int:
    spec = normalize_instance(_load_json(args.instance))
    inst, _ = build_instance(spec, 1, RngHandle(args.seed, ALPHA_STREAM))
    oracle = None
    if args.matroid:
        oracle = mat.from_spec(_load_json(args.matroid), inst.n, inst.m)
    print(json.dumps(solve_pstar(inst.means, oracle).to_dict(), indent=1, sort_keys=True))
    return 0


def cmd_lb_instance(args) -> int:
    if args.alpha:
        alpha = adversary.BlockAssignment(json.loads(args.alpha))
    else:
        alpha = adversary.BlockAssignment.sample(args.n, args.b, RngHandle(args.seed, ALPHA_STREAM))
    eps = adversary.lb_epsilon(args.T) if args.eps is None else args.eps
    inst = adversary.make_alpha_adversary(args.n, args.b, eps, alpha, args.T)
    out = {"n": inst.n, "m": inst.m, "T": inst.T, "eps": eps, "alpha": alpha.to_list(),
           "means": inst.means.tolist(),
           "guard_failures": adversary.opt_concentration_guard(args.n, args.b, args.T)}
    print(json.dumps(out, indent=1))
    return 0


def cmd_validate_matroid(args) -> int:
    oracle = mat.from_spec(_load_json(args.spec), args.n, args.m)
    violations = mat.validate_axioms(oracle)
    for v in violations:
        print(v)
    print("ok" if not violations else f"{len(violations)} violation(s)")
    return 0 if not violations else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bmmfa", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a sweep from a JSON config")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay", help="re-execute a run record and compare byte for byte")
    p.add_argument("record")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("lp", help="solve the max-min LP for an instance file")
    p.add_argument("instance")
    p.add_argument("--matroid", default=None, help="matroid spec JSON file")
    p.add_argument("--seed", type=int, default=0, help="seed for random alpha assignments")
    p.set_defaults(func=cmd_lp)

    p = sub.add_parser("lb-instance", help="print a hard block instance")
    p.add_argument("n", type=int)
    p.add_argument("b", type=int)
    p.add_argument("T", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", default=None, help="JSON list of per-block permutations")
    p.add_argument("--eps", type=float, default=None)
    p.set_defaults(func=cmd_lb_instance)

    p = sub.add_parser("validate-matroid", help="brute-force check the matroid axioms")
    p.add_argument("spec")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.set_defaults(func=cmd_validate_matroid)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BmmfaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
