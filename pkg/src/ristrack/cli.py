"""Command-line interface.

    ristrack run --spec spec.json --out results.csv [--seed N] [--jobs N]
    ristrack figure --id {snr|convergence|runtime|pilots} --scale {desk|paper} --out results.csv
    ristrack check-identifiability --config config.json

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys

from .channel import SystemConfig
from .errors import ConfigError, NumericError
from .experiment import ExperimentSpec, run_experiment, write_csv
from .presets import DEFAULT_SEED, FIGURE_ALIASES, make_figure_spec


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ristrack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment spec and write CSV records")
    p_run.add_argument("--spec", required=True, help="path to an experiment spec JSON file")
    p_run.add_argument("--out", required=True, help="output CSV path")
    p_run.add_argument("--seed", type=int, default=None, help="override the spec RNG seed")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel Monte-Carlo workers")

    p_fig = sub.add_parser("figure", help="run a canned benchmark figure experiment")
    p_fig.add_argument("--id", required=True, choices=sorted(FIGURE_ALIASES), help="figure id")
    p_fig.add_argument("--scale", default="desk", choices=("desk", "paper"))
    p_fig.add_argument("--out", required=True, help="output CSV path")
    p_fig.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_fig.add_argument("--jobs", type=int, default=1)

    p_chk = sub.add_parser("check-identifiability", help="report the uniqueness verdict for a config")
    p_chk.add_argument("--config", required=True, help="path to a system config JSON file")
    return parser


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            spec = ExperimentSpec.from_json(_read(args.spec))
            records = run_experiment(spec, seed=args.seed, jobs=args.jobs)
            write_csv(records, args.out)
            print(f"wrote {len(records)} records to {args.out}")
        elif args.command == "figure":
            spec = make_figure_spec(args.id, scale=args.scale, seed=args.seed)
            records = run_experiment(spec, jobs=args.jobs)
            write_csv(records, args.out)
            print(f"wrote {len(records)} records to {args.out}")
        elif args.command == "check-identifiability":
            from .experiment import identifiability_report

            cfg = SystemConfig.from_json(_read(args.config))
            print(identifiability_report(cfg))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
