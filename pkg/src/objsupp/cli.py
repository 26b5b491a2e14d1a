"""Command-line entry point: ``objsupp {train,eval,oracle-check}``.

Exit status: 0 success, 2 invalid config or arguments, 3 runtime failure
(including runs that finished with partial outputs).
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import CheckpointError, ConfigError, load_config, run_eval, run_oracle_check, run_train

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="objsupp", description="Train, evaluate and verify constrained RL agents.")
    parser.add_argument("--seed-override", type=int, default=None,
                        help="run a single seed instead of the config's seed list")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("train", help="train every configured seed and write metrics and a summary")
    p.add_argument("--config", required=True)
    p = sub.add_parser("eval", help="evaluate a saved checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, required=True)
    p = sub.add_parser("oracle-check", help="run the exact property suites on the configured grid")
    p.add_argument("--config", required=True)
    for sp in sub.choices.values():
        sp.add_argument("--seed-override", type=int, default=argparse.SUPPRESS,
                        help="run a single seed instead of the config's seed list")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "train":
            summary, out = run_train(cfg, args.seed_override)
            print(json.dumps({"status": summary["status"], "output_dir": str(out),
                              "aggregate": summary["aggregate"]}, ensure_ascii=False))
            if summary["partial"]:
                for r in summary["per_seed"]:
                    if r["status"] != "complete":
                        print(f"seed {r['seed']} failed: {r['error']}", file=sys.stderr)
                return EXIT_RUNTIME
        elif args.command == "eval":
            report, _ = run_eval(cfg, args.checkpoint, args.episodes, args.seed_override)
            print(json.dumps(report))
        else:
            report, _ = run_oracle_check(cfg, args.seed_override)
            print(json.dumps(report))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CheckpointError, OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
