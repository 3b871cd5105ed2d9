"""End-to-end tests for the command line interface."""

import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from almatch.cli import main

OUTPUT_FILES = ("matched.csv", "groups.json", "iterations.csv", "effects.json", "manifest.json")


def run_cli(argv):
    try:
        return main(argv)
    except SystemExit as exc:  # argparse uses sys.exit for usage errors
        return exc.code


def write_table(path, n=64, p=3, seed=0, blanks=()):
    """Deterministic CSV with string labels, binary treatment, linear outcome."""
    rng = np.random.default_rng(seed)
    codes = rng.integers(0, 2, size=(n, p))
    treat = rng.integers(0, 2, n)
    treat[:2] = [1, 0]
    y = codes @ np.arange(1.0, p + 1.0) + 2.0 * treat + rng.normal(0, 0.2, n)
    lines = [",".join([f"x{j}" for j in range(p)] + ["t", "y"])]
    for i in range(n):
        cells = [f"v{codes[i, j]}" for j in range(p)]
        for r, c in blanks:
            if r == i:
                cells[c] = ""
        lines.append(",".join(cells + [str(treat[i]), f"{y[i]:.6f}"]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return codes, treat, y


def base_args(inp, out, extra=()):
    return [
        "--input", str(inp),
        "--treatment-col", "t",
        "--outcome-col", "y",
        "--holdout-frac", "0.25",
        "--output-dir", str(out),
        *extra,
    ]


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def read_rows(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_successful_run_writes_every_output(tmp_path):
    inp = tmp_path / "in.csv"
    write_table(inp)
    out = tmp_path / "out"
    assert run_cli(base_args(inp, out)) == 0
    for name in OUTPUT_FILES:
        assert (out / name).is_file(), name
    manifest = read_json(out / "manifest.json")
    assert manifest["package"] == "almatch"
    assert manifest["input_rows"] == 64
    assert manifest["config"]["algorithm"] == "flame"
    assert manifest["config"]["c"] == 0.1
    assert sorted(manifest["outputs"]) == sorted(OUTPUT_FILES)
    assert len(manifest["stop_reasons"]) == 1


def test_matched_table_stars_exactly_the_off_set_cells(tmp_path):
    inp = tmp_path / "in.csv"
    codes, treat, y = write_table(inp)
    out = tmp_path / "out"
    assert run_cli(base_args(inp, out)) == 0
    groups = {g["group_id"]: g for g in read_json(out / "groups.json")}
    rows = read_rows(out / "matched.csv")
    assert rows, "expected at least one matched unit"
    ids = [int(r["unit_id"]) for r in rows]
    assert ids == sorted(ids) and len(set(ids)) == len(ids)
    for row in rows:
        unit = int(row["unit_id"])
        group = groups[int(row["group_id"])]
        on = set(group["on_set"])
        for j in range(3):
            cell = row[f"x{j}"]
            if f"x{j}" in on:
                assert cell == f"v{codes[unit, j]}"
            else:
                assert cell == "*"
        assert int(row["t"]) == treat[unit]
        assert float(row["y"]) == pytest.approx(float(f"{y[unit]:.6f}"), abs=0)
        assert unit in group["treated_ids"] + group["control_ids"]


def test_groups_json_reconstructs_the_reported_effects(tmp_path):
    inp = tmp_path / "in.csv"
    write_table(inp, seed=3)
    out = tmp_path / "out"
    assert run_cli(base_args(inp, out)) == 0
    groups = read_json(out / "groups.json")
    effects = read_json(out / "effects.json")
    sizes = [g["n_treated"] + g["n_control"] for g in groups]
    want_ate = sum(s * g["cate"] for s, g in zip(sizes, groups)) / sum(sizes)
    assert effects["ate"] == pytest.approx(want_ate, abs=1e-12)
    treated_total = sum(g["n_treated"] for g in groups)
    want_att = sum(g["n_treated"] * g["cate"] for g in groups) / treated_total
    assert effects["att"] == pytest.approx(want_att, abs=1e-12)
    assert effects["n_units"] == sum(sizes)
    assert effects["n_groups"] == len(groups)
    for g in groups:
        assert len(g["treated_ids"]) == g["n_treated"]
        assert len(g["control_ids"]) == g["n_control"]
        assert set(g["signature"]) == set(g["on_set"])


def test_iterations_csv_has_the_documented_columns(tmp_path):
    inp = tmp_path / "in.csv"
    write_table(inp, seed=4)
    out = tmp_path / "out"
    assert run_cli(base_args(inp, out)) == 0
    rows = read_rows(out / "iterations.csv")
    assert list(rows[0]) == [
        "iteration", "phase", "dropped", "pe", "bf", "mq", "n_newly_matched", "cumulative_matched"
    ]
    assert rows[0]["iteration"] == "0"
    assert rows[0]["phase"] == "exact"
    assert rows[0]["dropped"] == ""
    cumulative = [int(r["cumulative_matched"]) for r in rows]
    assert cumulative == sorted(cumulative)
    for r in rows:
        float(r["pe"]), float(r["bf"])  # parseable numbers
        assert r["mq"] != ""  # flame fills match quality on every row


def test_dame_rows_leave_match_quality_empty(tmp_path):
    inp = tmp_path / "in.csv"
    write_table(inp, seed=5)
    out = tmp_path / "out"
    assert run_cli(base_args(inp, out, ["--algorithm", "dame"])) == 0
    rows = read_rows(out / "iterations.csv")
    assert all(r["mq"] == "" for r in rows)
    dropped = [r["dropped"] for r in rows[1:]]
    assert all("|" in d or d for d in dropped)


def test_identical_runs_write_identical_bytes(tmp_path):
    inp = tmp_path / "in.csv"
    write_table(inp, seed=6)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert run_cli(base_args(inp, out_a)) == 0
    assert run_cli(base_args(inp, out_b)) == 0
    for name in ("matched.csv", "groups.json", "iterations.csv", "effects.json"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name
    ma, mb = read_json(out_a / "manifest.json"), read_json(out_b / "manifest.json")
    for volatile in ("created_utc", "elapsed_seconds"):
        ma.pop(volatile), mb.pop(volatile)
    ma["config"].pop("output_dir"), mb["config"].pop("output_dir")
    assert ma == mb


def test_usage_errors_exit_two(tmp_path):
    inp = tmp_path / "in.csv"
    write_table(inp, n=30)
    out = tmp_path / "out"
    assert run_cli(base_args(inp, out, ["--algorithm", "nearest"])) == 2
    assert run_cli(base_args(inp, out, ["--c", "-1"])) == 2
    assert run_cli(base_args(inp, out, ["--algorithm", "hybrid"])) == 2  # needs --flame-iters
    assert run_cli(["--treatment-col", "t", "--outcome-col", "y"]) == 2  # no --input
    both = base_args(inp, out) + ["--holdout", str(inp)]
    assert run_cli(both) == 2  # --holdout conflicts with --holdout-frac


def test_data_errors_exit_three(tmp_path, capsys):
    inp = tmp_path / "in.csv"
    write_table(inp, n=30)
    out = tmp_path / "out"
    args = base_args(inp, out)
    args[args.index("--treatment-col") + 1] = "nope"
    assert run_cli(args) == 3
    assert "nope" in capsys.readouterr().err
    bad = tmp_path / "bad.csv"
    bad.write_text("x0,t,y\na,2,1.0\nb,0,2.0\n", encoding="utf-8")
    assert run_cli(base_args(bad, out)) == 3


def test_unexpected_errors_exit_four(tmp_path):
    out = tmp_path / "out"
    assert run_cli(base_args(tmp_path / "missing.csv", out)) == 4


def test_a_run_with_no_matches_still_succeeds(tmp_path):
    # treated and control arms occupy disjoint category values
    inp = tmp_path / "in.csv"
    lines = ["x0,t,y"]
    for i in range(20):
        lines.append(f"a,1,{1.0 + i}")
        lines.append(f"b,0,{2.0 + i}")
    inp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    out = tmp_path / "out"
    assert run_cli(base_args(inp, out)) == 0
    effects = read_json(out / "effects.json")
    assert effects == {"ate": None, "att": None, "n_units": 0, "n_groups": 0}
    assert read_json(out / "groups.json") == []
    assert read_rows(out / "matched.csv") == []


def test_sentinel_mode_matches_on_missingness(tmp_path):
    inp = tmp_path / "in.csv"
    write_table(inp, blanks=((5, 1), (6, 1), (30, 0)))
    out = tmp_path / "out"
    assert run_cli(base_args(inp, out, ["--missing", "sentinel"])) == 0
    manifest = read_json(out / "manifest.json")
    assert manifest["matching_rows"] == [48]  # holdout took 16 of 64, none dropped


def test_drop_mode_excludes_incomplete_rows(tmp_path):
    inp = tmp_path / "in.csv"
    write_table(inp, blanks=((5, 1), (6, 1), (30, 0)))
    out = tmp_path / "out"
    assert run_cli(base_args(inp, out, ["--missing", "drop"])) == 0
    manifest = read_json(out / "manifest.json")
    assert manifest["input_rows"] == 64
    assert manifest["matching_rows"][0] <= 48 - 1  # at least one blank fell in matching


def test_impute_mode_writes_one_directory_per_imputation(tmp_path):
    inp = tmp_path / "in.csv"
    write_table(inp, blanks=((5, 1), (12, 0), (40, 2)))
    out = tmp_path / "out"
    args = base_args(inp, out, ["--missing", "impute", "--impute-count", "3"])
    assert run_cli(args) == 0
    per_imp = []
    for i in range(3):
        sub = out / f"imp_{i:02d}"
        for name in ("matched.csv", "groups.json", "iterations.csv", "effects.json"):
            assert (sub / name).is_file()
        per_imp.append(read_json(sub / "effects.json"))
    top = read_json(out / "effects.json")
    assert top["imputations"] == 3
    assert top["ate"] == pytest.approx(np.mean([e["ate"] for e in per_imp]), abs=1e-12)
    assert top["att"] == pytest.approx(np.mean([e["att"] for e in per_imp]), abs=1e-12)
    manifest = read_json(out / "manifest.json")
    assert len(manifest["stop_reasons"]) == 3
    assert len(manifest["matching_rows"]) == 3


def test_external_holdout_file(tmp_path):
    inp = tmp_path / "in.csv"
    write_table(inp, seed=7)
    hold = tmp_path / "hold.csv"
    write_table(hold, n=40, seed=8)
    out = tmp_path / "out"
    args = [
        "--input", str(inp), "--holdout", str(hold),
        "--treatment-col", "t", "--outcome-col", "y",
        "--output-dir", str(out),
    ]
    assert run_cli(args) == 0
    manifest = read_json(out / "manifest.json")
    assert manifest["holdout_rows"] == 40
    assert manifest["matching_rows"] == [64]  # nothing split away
    assert manifest["config"]["holdout_frac"] is None


def test_verbose_reports_progress_on_stderr(tmp_path, capsys):
    inp = tmp_path / "in.csv"
    write_table(inp, seed=9)
    out = tmp_path / "out"
    assert run_cli(base_args(inp, out, ["--verbose"])) == 0
    err = capsys.readouterr().err
    assert "iteration" in err
    assert "stopped" in err


def test_module_entry_point_runs_as_a_subprocess(tmp_path):
    inp = tmp_path / "in.csv"
    write_table(inp, n=40, seed=10)
    out = tmp_path / "out"
    proc = subprocess.run(
        [sys.executable, "-m", "almatch", *base_args(inp, out)],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    assert (out / "effects.json").is_file()


def test_replacement_flag_reaches_the_engine(tmp_path):
    inp = tmp_path / "in.csv"
    write_table(inp, seed=11)
    out = tmp_path / "out"
    assert run_cli(base_args(inp, out, ["--replacement", "--algorithm", "dame"])) == 0
    manifest = read_json(out / "manifest.json")
    assert manifest["config"]["replacement"] is True
    assert manifest["config"]["algorithm"] == "dame"
