"""Command-line front end: run a matching algorithm end to end on CSV files.

Writes five artifacts into the output directory: matched.csv (the starred
matched table), groups.json (full group detail), iterations.csv (per-iteration
diagnostics), effects.json (ATE/ATT), and manifest.json (resolved
configuration; the one file that carries timestamps).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .algorithms import AlgoConfig, IterationRecord, RunResult, StoppingRule, run
from .dataset import (
    EncodedDataset,
    HoldoutSpec,
    MissingPolicy,
    apply_missing_policy,
    load_table,
    split_holdout,
)
from .effects import ate, att, group_cate
from .errors import DataError, NoMatches
from .match_engine import MatchState
from .predictive_error import PredictorSpec


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="almatch",
        description="Almost-exact matching on discrete covariates with treatment-effect estimates.",
    )
    parser.add_argument("--input", required=True, help="CSV file with covariates, treatment, outcome")
    holdout = parser.add_mutually_exclusive_group()
    holdout.add_argument("--holdout", help="external holdout CSV (same columns as --input)")
    holdout.add_argument(
        "--holdout-frac",
        type=float,
        default=0.1,
        help="fraction of --input rows split off as the holdout (default 0.1)",
    )
    parser.add_argument("--treatment-col", required=True, help="name of the binary treatment column")
    parser.add_argument("--outcome-col", required=True, help="name of the numeric outcome column")
    parser.add_argument(
        "--algorithm",
        choices=("flame", "dame", "hybrid"),
        default="flame",
        help="matching schedule (default flame)",
    )
    parser.add_argument("--c", type=float, default=0.1, help="balancing-factor weight in match quality (default 0.1)")
    parser.add_argument(
        "--flame-iters",
        type=int,
        default=None,
        help="hybrid only: flame iterations before switching to dame",
    )
    parser.add_argument(
        "--missing",
        choices=("drop", "impute", "sentinel"),
        default="drop",
        help="missing-data policy (default drop)",
    )
    parser.add_argument(
        "--impute-count",
        type=int,
        default=1,
        help="number of imputed completions when --missing impute (default 1)",
    )
    parser.add_argument("--replacement", action="store_true", help="matched units stay eligible in later iterations")
    parser.add_argument("--max-iterations", type=int, default=None, help="stop after this many iterations")
    parser.add_argument("--min-unmatched-treated", type=int, default=None, help="stop at or below this many unmatched treated units")
    parser.add_argument("--min-unmatched-control", type=int, default=None, help="stop at or below this many unmatched control units")
    parser.add_argument(
        "--pe-rise",
        type=float,
        default=None,
        help="stop once iteration PE exceeds (1 + PE_RISE) times the full-set PE",
    )
    parser.add_argument("--bf-floor", type=float, default=None, help="stop once iteration BF falls below this value")
    parser.add_argument("--ridge-lambda", type=float, default=0.1, help="ridge penalty of the default predictor (default 0.1)")
    parser.add_argument("--na-token", default="NA", help="cell text treated as missing, besides empty cells (default NA)")
    parser.add_argument("--seed", type=int, default=0, help="seed for the holdout split and imputation (default 0)")
    parser.add_argument("--output-dir", default="out", help="directory for output files (default ./out)")
    parser.add_argument("--verbose", action="store_true", help="print per-iteration PE and BF to stderr")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        stopping = StoppingRule(
            max_iterations=args.max_iterations,
            min_unmatched_treated=args.min_unmatched_treated,
            min_unmatched_control=args.min_unmatched_control,
            pe_rise_epsilon=args.pe_rise,
            bf_floor=args.bf_floor,
        )
        config = AlgoConfig(
            algorithm=args.algorithm,
            c=args.c,
            flame_iterations_before_dame=args.flame_iters,
            with_replacement=args.replacement,
            stopping=stopping,
            predictor=PredictorSpec(ridge_lambda=args.ridge_lambda),
            seed=args.seed,
        )
        if args.impute_count < 1:
            raise ValueError("--impute-count must be >= 1")
    except ValueError as err:
        parser.error(str(err))

    try:
        return _run_pipeline(args, config)
    except DataError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except Exception as err:  # noqa: BLE001 - the CLI boundary maps everything to exit 4
        print(f"error: {err}", file=sys.stderr)
        return 4


run_cli = main


def _run_pipeline(args: argparse.Namespace, config: AlgoConfig) -> int:
    started = time.perf_counter()
    na_tokens = ("", args.na_token)
    ds_raw = load_table(
        args.input, args.treatment_col, args.outcome_col, na_tokens=na_tokens
    )
    if args.holdout:
        external = load_table(
            args.holdout,
            args.treatment_col,
            args.outcome_col,
            na_tokens=na_tokens,
            like=ds_raw,
        )
        matching_raw, holdout_raw = split_holdout(
            ds_raw, HoldoutSpec(source="external-table"), external=external
        )
    else:
        matching_raw, holdout_raw = split_holdout(
            ds_raw, HoldoutSpec(source="fraction", fraction=args.holdout_frac, seed=args.seed)
        )

    impute_count = args.impute_count if args.missing == "impute" else 1
    holdout = apply_missing_policy(
        holdout_raw, MissingPolicy(mode=args.missing, impute_count=1, seed=args.seed)
    )[0]
    matching_sets = apply_missing_policy(
        matching_raw, MissingPolicy(mode=args.missing, impute_count=impute_count, seed=args.seed)
    )

    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    results: list[RunResult] = []
    effect_dicts: list[dict] = []
    written: list[str] = []
    for i, matching in enumerate(matching_sets):
        result = run(matching, holdout, config)
        results.append(result)
        if args.verbose:
            tag = f"imp {i}: " if len(matching_sets) > 1 else ""
            for rec in result.records:
                print(
                    f"{tag}iteration {rec.iteration} ({rec.phase}): "
                    f"pe={rec.pe!r} bf={rec.bf!r} newly_matched={rec.n_newly_matched}",
                    file=sys.stderr,
                )
            print(f"{tag}stopped: {result.stop_reason}", file=sys.stderr)

        target = out_dir if len(matching_sets) == 1 else out_dir / f"imp_{i:02d}"
        target.mkdir(parents=True, exist_ok=True)
        write_matched_table(result.state, matching, target / "matched.csv")
        write_groups_json(result.state, matching, target / "groups.json")
        write_iterations_csv(result.records, matching, target / "iterations.csv")
        effect_dicts.append(_effects_dict(result.state, matching))
        _write_json(effect_dicts[-1], target / "effects.json")
        written.extend(
            str((target / name).relative_to(out_dir))
            for name in ("matched.csv", "groups.json", "iterations.csv", "effects.json")
        )

    if len(matching_sets) > 1:
        _write_json(_average_effects(effect_dicts), out_dir / "effects.json")
        written.append("effects.json")

    manifest = {
        "package": "almatch",
        "version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "elapsed_seconds": time.perf_counter() - started,
        "config": {
            "input": args.input,
            "holdout": args.holdout,
            "holdout_frac": None if args.holdout else args.holdout_frac,
            "treatment_col": args.treatment_col,
            "outcome_col": args.outcome_col,
            "algorithm": args.algorithm,
            "c": args.c,
            "flame_iters": args.flame_iters,
            "missing": args.missing,
            "impute_count": impute_count,
            "replacement": args.replacement,
            "max_iterations": args.max_iterations,
            "min_unmatched_treated": args.min_unmatched_treated,
            "min_unmatched_control": args.min_unmatched_control,
            "pe_rise": args.pe_rise,
            "bf_floor": args.bf_floor,
            "ridge_lambda": args.ridge_lambda,
            "na_token": args.na_token,
            "seed": args.seed,
            "output_dir": args.output_dir,
        },
        "input_rows": ds_raw.n,
        "matching_rows": [m.n for m in matching_sets],
        "holdout_rows": holdout.n,
        "stop_reasons": [r.stop_reason for r in results],
        "outputs": sorted(written) + ["manifest.json"],
    }
    _write_json(manifest, out_dir / "manifest.json")
    return 0


def _effects_dict(state: MatchState, ds: EncodedDataset) -> dict:
    try:
        est_ate = ate(state, ds)
        est_att = att(state, ds)
    except NoMatches:
        return {"ate": None, "att": None, "n_units": 0, "n_groups": 0}
    return {
        "ate": est_ate.value,
        "att": est_att.value,
        "n_units": est_ate.n_units,
        "n_groups": len(state.groups),
    }


def _average_effects(effect_dicts: list[dict]) -> dict:
    def mean_of(key):
        values = [d[key] for d in effect_dicts]
        if any(v is None for v in values):
            return None
        return float(np.mean(values))

    return {
        "ate": mean_of("ate"),
        "att": mean_of("att"),
        "n_units": mean_of("n_units"),
        "n_groups": mean_of("n_groups"),
        "imputations": len(effect_dicts),
    }


def _plain_id(value):
    if isinstance(value, (int, np.integer)):
        return int(value)
    return str(value)


def _matched_rows_by_id(state: MatchState, ds: EncodedDataset) -> list[int]:
    rows = [int(r) for r in np.flatnonzero(state.matched)]
    return sorted(rows, key=lambda r: _plain_id(ds.unit_ids[r]))


def write_matched_table(state: MatchState, ds: EncodedDataset, path) -> None:
    """Write the starred matched table.

    One row per matched unit, ordered by unit id.  A covariate used by the
    unit's main group keeps its original value; every other covariate cell is
    the literal ``*``.  Unmatched units do not appear.
    """
    names = ds.covariate_names
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["unit_id", *names, ds.treatment_name, ds.outcome_name, "group_id", "iteration"]
        )
        for r in _matched_rows_by_id(state, ds):
            gid = int(state.main_group[r])
            on = set(state.groups[gid].on_cols)
            cells = [
                ds.decode(j, int(ds.covariates[r, j])) if j in on else "*"
                for j in range(ds.p)
            ]
            writer.writerow(
                [
                    _plain_id(ds.unit_ids[r]),
                    *cells,
                    int(ds.treatment[r]),
                    repr(float(ds.outcome[r])),
                    gid,
                    int(state.first_iteration[r]),
                ]
            )


def write_groups_json(state: MatchState, ds: EncodedDataset, path) -> None:
    """Write every matched group with members, signature, and its CATE."""
    names = ds.covariate_names
    payload = []
    for gid, g in enumerate(state.groups):
        payload.append(
            {
                "group_id": gid,
                "iteration": g.iteration,
                "on_set": [names[c] for c in g.on_cols],
                "signature": {names[c]: ds.decode(c, code) for c, code in g.signature_values},
                "treated_ids": [_plain_id(ds.unit_ids[r]) for r in g.treated_rows],
                "control_ids": [_plain_id(ds.unit_ids[r]) for r in g.control_rows],
                "n_treated": g.n_treated,
                "n_control": g.n_control,
                "cate": group_cate(g, ds.outcome),
            }
        )
    _write_json(payload, path)


def write_iterations_csv(records: list[IterationRecord], ds: EncodedDataset, path) -> None:
    """Write per-iteration diagnostics: dropped columns, PE, BF, MQ, match counts."""
    names = ds.covariate_names
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["iteration", "phase", "dropped", "pe", "bf", "mq", "n_newly_matched", "cumulative_matched"]
        )
        for rec in records:
            writer.writerow(
                [
                    rec.iteration,
                    rec.phase,
                    "|".join(names[c] for c in rec.dropped_cols),
                    repr(rec.pe),
                    repr(rec.bf),
                    "" if rec.mq is None else repr(rec.mq),
                    rec.n_newly_matched,
                    rec.cumulative_matched,
                ]
            )


def _write_json(payload, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


if __name__ == "__main__":
    sys.exit(main())
