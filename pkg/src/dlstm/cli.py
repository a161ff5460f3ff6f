"""Command line entry point: ``dlstm gen-data | run | compare``."""

import argparse
import sys

from . import data as D
from .experiment import (ConfigError, compare_rows, load_config, markdown_table,
                         run_experiment, write_compare_csv)
from .trainer import TrainingDivergence


def cmd_gen_data(days, seed, out_path):
    records = D.gen_synthetic(days, seed)
    D.write_series(records, out_path)
    return records


def cmd_run(config_path, workers=1):
    return run_experiment(load_config(config_path), workers=workers)


def cmd_compare(report_paths, csv_path=None):
    if len(report_paths) < 2:
        raise ConfigError("compare needs at least two reports")
    rows = compare_rows(report_paths)
    if csv_path:
        write_compare_csv(rows, csv_path)
    return markdown_table(rows)


def build_parser():
    parser = argparse.ArgumentParser(prog="dlstm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic daily load series as CSV")
    p.add_argument("--days", type=int, default=730)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("run", help="train and evaluate per a YAML config")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=1,
                   help="threads for agent-local training (results do not depend on it)")

    p = sub.add_parser("compare", help="tabulate test metrics of several runs")
    p.add_argument("reports", nargs="+", help="report.json files")
    p.add_argument("--csv", help="also write the table as CSV")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen-data":
            records = cmd_gen_data(args.days, args.seed, args.out)
            print(f"wrote {len(records)} days to {args.out}")
        elif args.command == "run":
            report = cmd_run(args.config, workers=args.workers)
            m = report["metrics"]
            print(f"{report['config']['name']}: test MAPE {100 * m['mape']:.3f}%  "
                  f"MAE {m['mae']:.3f}  MSE {m['mse_plain']:.3f}  "
                  f"final disagreement {report['train']['final_disagreement']:.3e}")
        else:
            print(cmd_compare(args.reports, args.csv))
    except TrainingDivergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, D.DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
