"""Command-line interface.

    crahn-sim run --scenario S --experiment {detection,spectrum,discovery,all}
                  [--seed N] [--replications K] --out DIR
    crahn-sim validate --scenario S
    crahn-sim render-situation --db RECORDS.csv --out FILE

Exit codes: 0 ok, 1 configuration error, 2 runtime error.
"""

import argparse
import csv
import sys

from .experiments import EXPERIMENTS, run_experiment
from .scenario import ScenarioError, load_scenario
from .situation import (SituationDb, SituationRecord, SituationValidationError,
                        situation_table_csv, situation_table_text)

RECORD_FIELDS = ["latitude", "longitude", "situation", "timestamp",
                 "short_message", "long_message", "ontology"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crahn-sim",
        description="Disaster-response CRAHN simulator: detection, spectrum, discovery")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment suite")
    run_p.add_argument("--scenario", required=True)
    run_p.add_argument("--experiment", default="all",
                       choices=list(EXPERIMENTS) + ["all"])
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--replications", type=int, default=None)
    run_p.add_argument("--out", required=True)

    val_p = sub.add_parser("validate", help="validate a scenario file")
    val_p.add_argument("--scenario", required=True)

    ren_p = sub.add_parser("render-situation",
                           help="render a situation database CSV as a table")
    ren_p.add_argument("--db", required=True)
    ren_p.add_argument("--out", required=True)
    ren_p.add_argument("--format", default="text", choices=["text", "csv"])
    return parser


def _load_situation_db(path: str) -> SituationDb:
    db = SituationDb()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f for f in RECORD_FIELDS[:5]
                                         if f not in reader.fieldnames]:
            raise SituationValidationError(
                "header", f"situation db CSV needs columns {RECORD_FIELDS[:5]}")
        for row in reader:
            db.upsert(SituationRecord(
                latitude=float(row["latitude"]), longitude=float(row["longitude"]),
                situation=row["situation"], timestamp=row["timestamp"],
                short_message=row["short_message"],
                long_message=row.get("long_message") or "",
                ontology=row.get("ontology") or ""))
    return db


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "validate":
        try:
            load_scenario(args.scenario)
        except ScenarioError as exc:
            print(f"invalid scenario: {exc}", file=sys.stderr)
            return 1
        print("scenario ok")
        return 0
    if args.command == "run":
        try:
            cfg = load_scenario(args.scenario)
        except ScenarioError as exc:
            print(f"invalid scenario: {exc}", file=sys.stderr)
            return 1
        try:
            reports = run_experiment(cfg, args.experiment, seed=args.seed,
                                     replications=args.replications, out_dir=args.out)
        except Exception as exc:
            print(f"run failed: {exc}", file=sys.stderr)
            return 2
        for report in reports:
            print(f"{report.experiment}: {len(report.rows)} rows, "
                  f"{len(report.errors)} failed replications -> {args.out}")
        return 0
    if args.command == "render-situation":
        try:
            db = _load_situation_db(args.db)
        except (OSError, ValueError) as exc:
            print(f"cannot load situation db: {exc}", file=sys.stderr)
            return 1
        text = situation_table_text(db) if args.format == "text" else situation_table_csv(db)
        try:
            with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"cannot write output: {exc}", file=sys.stderr)
            return 2
        return 0
    return 1


if __name__ == "__main__":
    sys.exit(main())
