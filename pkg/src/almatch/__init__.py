"""Almost-exact matching for causal inference on discrete covariates.

Units are matched into groups that agree exactly on an adaptively chosen
subset of covariates.  Covariates are dropped in an order driven by holdout
predictive error, so units are matched on the covariates that matter most for
the outcome, and treatment effects are then read off the matched groups.

Typical use::

    from almatch import AlgoConfig, HoldoutSpec, ate, load_table, run, split_holdout

    ds = load_table("trial.csv", treatment_col="treated", outcome_col="outcome")
    matching, holdout = split_holdout(ds, HoldoutSpec(fraction=0.1, seed=7))
    result = run(matching, holdout, AlgoConfig(algorithm="flame"))
    print(ate(result.state, matching))
"""

from .algorithms import (
    AlgoConfig,
    ActiveSetLattice,
    IterationRecord,
    RunResult,
    StoppingRule,
    exact_match_bootstrap,
    generate_new_active_sets,
    run,
    run_dame,
    run_flame,
    run_hybrid,
    should_stop,
)
from .dataset import (
    ColumnSchema,
    EncodedDataset,
    HoldoutSpec,
    MissingPolicy,
    apply_missing_policy,
    load_table,
    sample_dataset_path,
    split_holdout,
)
from .effects import EffectEstimate, ate, att, group_cate, unit_cate
from .errors import AlmatchError, DataError
from .match_engine import (
    MatchedGroup,
    MatchState,
    balancing_factor,
    compute_signatures,
    form_groups,
    match_on_set,
    preview_match,
)
from .predictive_error import (
    PEEvaluator,
    PEResult,
    PredictorSpec,
    fit_ridge,
    one_hot_design,
    predictive_error,
)

__version__ = "0.1.0"

__all__ = [
    "AlgoConfig",
    "ActiveSetLattice",
    "AlmatchError",
    "ColumnSchema",
    "DataError",
    "EffectEstimate",
    "EncodedDataset",
    "HoldoutSpec",
    "IterationRecord",
    "MatchState",
    "MatchedGroup",
    "MissingPolicy",
    "PEEvaluator",
    "PEResult",
    "PredictorSpec",
    "RunResult",
    "StoppingRule",
    "apply_missing_policy",
    "ate",
    "att",
    "balancing_factor",
    "compute_signatures",
    "exact_match_bootstrap",
    "fit_ridge",
    "form_groups",
    "generate_new_active_sets",
    "group_cate",
    "load_table",
    "match_on_set",
    "one_hot_design",
    "predictive_error",
    "preview_match",
    "run",
    "run_dame",
    "run_flame",
    "run_hybrid",
    "sample_dataset_path",
    "should_stop",
    "split_holdout",
    "unit_cate",
    "__version__",
]
