"""Command-line front end.

Subcommands:

* ``learn``            run a configured sweep and write CSV + JSON-lines rows
* ``calibrate-tester`` sweep the tester's scale constant and report error rates
* ``verify``           run a named self-check suite, emit a JSON summary
* ``gen-instances``    write an adversarial instance file

Exit codes are stable for CI: 0 success, 1 usage or config error, 2
assertion or audit failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import bench, verify
from .pipeline import AuditError

__all__ = ["main", "build_parser"]


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the CLI contract reserves 2 for
    # assertion failures and uses 1 for anything wrong with the invocation.
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="advice-learn", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    learn = sub.add_parser("learn", help="run a configured sweep")
    learn.add_argument("--config", required=True, help="YAML sweep configuration")
    learn.add_argument("--seed", type=int, default=None, help="override the config's master seed")
    learn.add_argument("--trials", type=int, default=None, help="override trials per grid point")
    learn.add_argument("--out", default="results", help="output path prefix (default: results)")
    learn.add_argument(
        "--workers",
        type=int,
        default=int(os.environ.get("ADVICE_LEARN_WORKERS", "1")),
        help="parallel trial workers (env ADVICE_LEARN_WORKERS)",
    )
    learn.add_argument(
        "--format",
        choices=("csv", "jsonl"),
        default=None,
        help="write only one output format (default: both)",
    )

    cal = sub.add_parser("calibrate-tester", help="sweep the tester scale constant c")
    cal.add_argument("--d", type=int, required=True)
    cal.add_argument("--epsilon", type=float, required=True)
    cal.add_argument("--trials", type=int, default=200)
    cal.add_argument("--seed", type=int, default=0)

    ver = sub.add_parser("verify", help="run a self-check suite")
    ver.add_argument("suite", choices=sorted(verify.SUITES), help="suite name")
    ver.add_argument("--seed", type=int, default=0)

    gen = sub.add_parser("gen-instances", help="write an adversarial instance file")
    gen.add_argument("--family", choices=("unbalanced", "balanced"), required=True)
    gen.add_argument("--d", type=int, required=True)
    gen.add_argument("--epsilon", type=float, required=True)
    gen.add_argument("--lam", type=float, default=None, help="advice error (balanced family)")
    gen.add_argument("--subset-size", type=int, default=None, help="hidden subset size (unbalanced family)")
    gen.add_argument("--m-sets", type=int, default=1, help="number of code words")
    gen.add_argument("--min-symdiff", type=int, default=0, help="pairwise symmetric-difference floor")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output JSON path")
    return parser


def _cmd_learn(args) -> int:
    try:
        spec = bench.load_config(args.config)
    except bench.ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    if args.seed is not None or args.trials is not None:
        from dataclasses import replace

        overrides = {}
        if args.seed is not None:
            if args.seed < 0:
                print("config error at --seed: seed must be non-negative", file=sys.stderr)
                return 1
            overrides["seed"] = args.seed
        if args.trials is not None:
            if args.trials < 1:
                print("config error at --trials: trials must be positive", file=sys.stderr)
                return 1
            overrides["trials"] = args.trials
        spec = replace(spec, **overrides)
    try:
        rows = bench.run_sweep(spec, workers=max(1, args.workers))
    except AuditError as exc:
        print(f"audit failure: {exc}", file=sys.stderr)
        return 2
    expected = len(spec.grid()) * spec.trials
    if len(rows) != expected:
        print(f"audit failure: produced {len(rows)} rows, expected {expected}", file=sys.stderr)
        return 2
    written = []
    if args.format in (None, "csv"):
        bench.write_csv(rows, f"{args.out}.csv")
        written.append(f"{args.out}.csv")
    if args.format in (None, "jsonl"):
        bench.write_jsonl(rows, f"{args.out}.jsonl")
        written.append(f"{args.out}.jsonl")
    digest = bench.rows_hash(rows)
    print(f"{len(rows)} rows -> {', '.join(written)}")
    print(f"result hash (duration excluded): {digest}")
    return 0


def _cmd_calibrate(args) -> int:
    try:
        report = bench.calibrate_tester(args.d, args.epsilon, args.trials, args.seed)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    header = ("c", "accept@0", "accept@eps", "accept@2eps", "accept@3eps")
    print("  ".join(f"{h:>12}" for h in header))
    for row in report.rows:
        cells = [f"{row['c']:>12.3f}"] + [f"{r:>12.3f}" for r in row["accept_rates"]]
        print("  ".join(cells))
    if report.recommended_c is None:
        print("no c in the grid meets the 1/4 error budget at both boundaries")
    else:
        print(f"recommended c: {report.recommended_c}")
    return 0


def _cmd_verify(args) -> int:
    summary = verify.run_suite(args.suite, seed=args.seed)
    print(json.dumps(summary, indent=2))
    return 0 if summary["passed"] else 2


def _cmd_gen_instances(args) -> int:
    try:
        payload = bench.generate_instances(
            family=args.family,
            d=args.d,
            seed=args.seed,
            epsilon=args.epsilon,
            lam=args.lam,
            subset_size=args.subset_size,
            m_sets=args.m_sets,
            min_symdiff=args.min_symdiff,
        )
    except (ValueError, RuntimeError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")
    print(f"wrote {len(payload['pairs'])} instance(s) to {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "learn":
        return _cmd_learn(args)
    if args.command == "calibrate-tester":
        return _cmd_calibrate(args)
    if args.command == "verify":
        return _cmd_verify(args)
    if args.command == "gen-instances":
        return _cmd_gen_instances(args)
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
