"""Command-line entry point: ``gwage <kind> --config FILE [options]``.

Exit codes: 0 success, 1 usage or config error, 2 runtime error,
3 coupling violation (a replayable config snippet goes to stderr).
"""
from __future__ import annotations

import argparse
import csv
import datetime
import io
import sys

from .config import Config, ConfigError, apply_override, parse_config
from .experiments import KINDS, run_experiment
from .stochastic import ParameterError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_VIOLATION = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gwage", description="Gateway polling / age-of-information experiments.")
    sub = parser.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", help="experiment config file ([section] key = value)")
        p.add_argument("--seed", type=int, help="base seed (overrides [run] seed)")
        p.add_argument("--out", help="CSV output path (default: stdout)")
        p.add_argument("--replicates", type=int, help="overrides [run] replicates")
        p.add_argument("--no-timestamp", action="store_true",
                       help="omit the generation time from the metadata header")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a single config value (repeatable)")
    return parser


def load_config(args) -> Config:
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", source=args.config) from None
        cfg = parse_config(text, args.config)
    else:
        cfg = Config()
    kind = cfg.get("experiment", "kind")
    if kind is not None and kind != args.kind:
        raise cfg.error("experiment", "kind", f"config is for {kind!r}, not {args.kind!r}")
    for assignment in args.set:
        apply_override(cfg, assignment)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be >= 0", source="--seed")
        cfg.set("run", "seed", args.seed)
    if args.replicates is not None:
        cfg.set("run", "replicates", args.replicates)
    return cfg


def render_csv(result) -> str:
    buf = io.StringIO()
    for line in result.metadata:
        buf.write(f"# {line}\n")
    writer = csv.DictWriter(buf, fieldnames=result.columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(result.rows)
    return buf.getvalue()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        stamp = None if args.no_timestamp else (
            datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"))
        result = run_experiment(args.kind, cfg, timestamp=stamp)
    except (ConfigError, ParameterError) as exc:
        print(f"gwage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"gwage: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    text = render_csv(result)
    try:
        if args.out:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"gwage: cannot write output: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if result.violations:
        print(f"gwage: dominance violated in {len(result.violations)} coupled run(s); "
              "first reproducer:", file=sys.stderr)
        print(result.violations[0], file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
