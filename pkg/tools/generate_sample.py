"""Regenerate the bundled sample dataset (src/almatch/data/sample.csv).

A small synthetic program-evaluation table: five discrete covariates, a
binary treatment with a true effect of 2.0, and an outcome driven by three of
the covariates.  Rows are drawn from a small pool of covariate profiles so
that plenty of exact matches exist, and a handful of cells are blanked to
exercise the missing-data policies.
"""

import csv
from pathlib import Path

import numpy as np

AGE = ("18-29", "30-44", "45-64", "65+")
INCOME = ("low", "mid", "high")
URBAN = ("rural", "urban")
EDUCATION = ("primary", "secondary", "tertiary")
REGION = ("north", "center", "south")

N_ROWS = 240
N_POOL_ROWS = 190
N_PROFILES = 18
TRUE_EFFECT = 2.0
SEED = 20240811


def main() -> None:
    rng = np.random.default_rng(SEED)
    profiles = np.column_stack(
        [
            rng.integers(0, len(AGE), N_PROFILES),
            rng.integers(0, len(INCOME), N_PROFILES),
            rng.integers(0, len(URBAN), N_PROFILES),
            rng.integers(0, len(EDUCATION), N_PROFILES),
            rng.integers(0, len(REGION), N_PROFILES),
        ]
    )
    # Pool rows repeat a profile and mostly match exactly; the free rows are
    # drawn from the full support and usually need covariates dropped first.
    pool_rows = profiles[rng.integers(0, N_PROFILES, N_POOL_ROWS)]
    free_rows = np.column_stack(
        [
            rng.integers(0, len(AGE), N_ROWS - N_POOL_ROWS),
            rng.integers(0, len(INCOME), N_ROWS - N_POOL_ROWS),
            rng.integers(0, len(URBAN), N_ROWS - N_POOL_ROWS),
            rng.integers(0, len(EDUCATION), N_ROWS - N_POOL_ROWS),
            rng.integers(0, len(REGION), N_ROWS - N_POOL_ROWS),
        ]
    )
    rows = np.concatenate([pool_rows, free_rows])
    rows = rows[rng.permutation(N_ROWS)]
    treated = (rng.random(N_ROWS) < 0.45).astype(int)
    outcome = (
        1.5 * rows[:, 0]
        + 2.0 * (rows[:, 1] == 2)
        + 0.8 * rows[:, 2]
        + 0.5 * rows[:, 3]
        + TRUE_EFFECT * treated
        + rng.normal(0.0, 0.3, N_ROWS)
    )

    cells = [
        [AGE[r[0]], INCOME[r[1]], URBAN[r[2]], EDUCATION[r[3]], REGION[r[4]]]
        for r in rows
    ]
    for i in rng.choice(N_ROWS, 6, replace=False):
        cells[i][3] = ""
    for i in rng.choice(N_ROWS, 3, replace=False):
        cells[i][4] = "NA"

    out = Path(__file__).resolve().parents[1] / "src" / "almatch" / "data" / "sample.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["age_band", "income_band", "urban", "education", "region", "treated", "outcome"])
        for i in range(N_ROWS):
            writer.writerow([*cells[i], treated[i], f"{outcome[i]:.4f}"])
    print(f"wrote {out} ({N_ROWS} rows)")


if __name__ == "__main__":
    main()
