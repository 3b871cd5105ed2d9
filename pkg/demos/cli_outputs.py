## THE COMMAND LINE AND ITS OUTPUT FILES
# The same engine is reachable without writing Python.  This script shells
# out to the installed entry point and then walks the files it wrote.

import csv
import json
import subprocess
import sys
import tempfile
from pathlib import Path

from almatch import sample_dataset_path

out_dir = Path(tempfile.mkdtemp(prefix="almatch_demo_"))
cmd = [
    sys.executable, "-m", "almatch",
    "--input", str(sample_dataset_path()),
    "--treatment-col", "treated",
    "--outcome-col", "outcome",
    "--algorithm", "hybrid",
    "--flame-iters", "2",
    "--missing", "sentinel",
    "--holdout-frac", "0.1",
    "--seed", "0",
    "--output-dir", str(out_dir),
]
print("running:", " ".join(cmd[1:]))
subprocess.run(cmd, check=True)

## MANIFEST: what ran, on what, and what it produced
manifest = json.loads((out_dir / "manifest.json").read_text())
print(f"\nmanifest: {manifest['package']} {manifest['version']}")
print(f"  input rows {manifest['input_rows']}, holdout rows {manifest['holdout_rows']}")
print(f"  stopped because: {manifest['stop_reasons'][0]}")
print(f"  outputs: {', '.join(manifest['outputs'])}")

## ITERATIONS: the search path, one row per matching pass
with (out_dir / "iterations.csv").open(newline="") as fh:
    rows = list(csv.DictReader(fh))
print(f"\niterations.csv has {len(rows)} passes; phases seen:",
      ",".join(sorted({r["phase"] for r in rows})))

## GROUPS: every matched group with its signature and estimate
groups = json.loads((out_dir / "groups.json").read_text())
g = max(groups, key=lambda g: g["n_treated"] + g["n_control"])
print(f"\ngroups.json holds {len(groups)} groups; the largest:")
print(f"  matched on {g['on_set']} at values {g['signature']}")
print(f"  {g['n_treated']} treated vs {g['n_control']} control, cate {g['cate']:.3f}")

## MATCHED TABLE: one row per matched unit, stars on unused covariates
lines = (out_dir / "matched.csv").read_text().splitlines()
print(f"\nmatched.csv has {len(lines) - 1} units; a starred row:")
starred = next(line for line in lines[1:] if "*" in line)
print(f"  {lines[0]}")
print(f"  {starred}")
print("  (a * is a covariate the unit's group did not match on)")

## EFFECTS: the headline numbers
effects = json.loads((out_dir / "effects.json").read_text())
print(f"\neffects.json: ATE {effects['ate']:.3f}, ATT {effects['att']:.3f}")
print(f"  from {effects['n_units']} matched units in {effects['n_groups']} groups")
