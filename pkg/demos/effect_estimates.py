## FROM MATCHED GROUPS TO EFFECT ESTIMATES
# A matched group is a set of units that agree exactly on some covariate
# subset and contain both arms.  Its CATE is the treated-minus-control mean
# outcome.  Everything else is weighting.

import numpy as np

from almatch import (
    AlgoConfig,
    HoldoutSpec,
    MissingPolicy,
    apply_missing_policy,
    ate,
    att,
    group_cate,
    load_table,
    run_flame,
    sample_dataset_path,
    split_holdout,
    unit_cate,
)
from almatch.errors import UnitUnmatched

raw = load_table(sample_dataset_path(), treatment_col="treated", outcome_col="outcome")
(complete,) = apply_missing_policy(raw, MissingPolicy(mode="drop"))
matching, holdout = split_holdout(complete, HoldoutSpec(source="fraction", fraction=0.1, seed=0))
result = run_flame(matching, holdout, AlgoConfig(algorithm="flame", c=0.1))
state = result.state
names = matching.covariate_names

## PER-GROUP ESTIMATES
# Later iterations match on fewer covariates, so their groups are coarser
# and their estimates lean harder on the irrelevance of what was dropped.
print("iteration  size  t/c    matched on               cate")
for g in sorted(state.groups, key=lambda g: (g.iteration, -g.size))[:10]:
    on = ",".join(names[c] for c in g.on_cols)
    print(
        f"{g.iteration:>9}  {g.size:>4}  {g.n_treated:>2}/{g.n_control:<2}"
        f"  {on:<24} {group_cate(g, matching.outcome):>6.3f}"
    )
print(f"... {len(state.groups)} groups in total\n")

## PER-UNIT ESTIMATES
# A unit's estimate is the CATE of its main group, the first group it ever
# joined.  Unmatched units have no estimate, and asking for one raises.
for row in (0, 1, 2):
    try:
        print(f"unit {int(matching.unit_ids[row])}: cate {unit_cate(state, matching, row):.3f}")
    except UnitUnmatched:
        print(f"unit {int(matching.unit_ids[row])}: never matched")

## POPULATION SUMMARIES
# ATE weights each group by how many units call it their main group, which
# counts every matched unit exactly once.  ATT restricts to treated units.
est_ate = ate(state, matching)
est_att = att(state, matching)
print(f"\nATE {est_ate.value:.3f} from {est_ate.n_units} units in {est_ate.n_groups} groups")
print(f"ATT {est_att.value:.3f} from {est_att.n_units} treated units")

## THE SAME NUMBERS BY HAND
# ATE is reproducible from per-unit estimates: average them over all
# matched units.  This is exactly what the weighting above computes.
per_unit = [
    unit_cate(state, matching, r)
    for r in range(matching.n)
    if state.main_group[r] >= 0
]
print(f"mean of per-unit estimates: {np.mean(per_unit):.3f} (matches ATE)")

treated_units = [
    unit_cate(state, matching, r)
    for r in range(matching.n)
    if state.main_group[r] >= 0 and matching.treatment[r] == 1
]
print(f"mean over treated units:    {np.mean(treated_units):.3f} (matches ATT)")
