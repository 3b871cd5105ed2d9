"""CSV ingestion, integer encoding, missing-data policies, and holdout splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    AllRowsDropped,
    DataError,
    HoldoutTooSmall,
    MissingColumn,
    NonBinaryTreatment,
    SchemaMismatch,
    UnparseableOutcome,
)

#: Placeholder code for a recorded-but-unresolved missing cell.
MISSING_CODE = -1

#: Cell contents treated as missing by default: empty string or literal "NA".
DEFAULT_NA_TOKENS = ("", "NA")

COVARIATE = "covariate"
TREATMENT = "treatment"
OUTCOME = "outcome"


@dataclass(frozen=True)
class ColumnSchema:
    """Metadata for one column of an encoded table.

    ``cardinality`` counts distinct observed categories; ``levels`` maps each
    code back to its original label in code order.  ``sentinel_count`` is the
    number of extra per-cell codes appended above ``cardinality`` by the
    sentinel missing-data policy.
    """

    name: str
    cardinality: int
    kind: str = COVARIATE
    levels: tuple[str, ...] = ()
    sentinel_count: int = 0

    @property
    def code_bound(self) -> int:
        """Exclusive upper bound on codes stored in this column."""
        return self.cardinality + self.sentinel_count


@dataclass(eq=False)
class EncodedDataset:
    """Integer-encoded table: covariate codes, binary treatment, numeric outcome.

    Covariate cells hold dense codes ``0..cardinality-1`` (first-appearance
    order), sentinel codes ``>= cardinality``, or ``MISSING_CODE`` for cells
    recorded as missing but not yet resolved by a policy.  Instances are
    immutable after construction; the backing arrays are marked read-only.
    """

    covariates: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray
    schema: tuple[ColumnSchema, ...]
    unit_ids: np.ndarray

    def __post_init__(self):
        cov = np.array(self.covariates, dtype=np.int64, copy=True)
        if cov.ndim != 2:
            raise DataError("covariates must be a 2-d matrix")
        n, p = cov.shape
        if n < 1 or p < 1:
            raise DataError("dataset needs at least one row and one covariate")
        treat = np.array(self.treatment, dtype=np.int8, copy=True).reshape(-1)
        out = np.array(self.outcome, dtype=np.float64, copy=True).reshape(-1)
        ids = np.array(self.unit_ids, copy=True).reshape(-1)
        if not (len(treat) == len(out) == len(ids) == n):
            raise DataError("treatment, outcome, and unit_ids must all have length n")
        if not np.isin(treat, (0, 1)).all():
            raise NonBinaryTreatment("treatment vector contains values outside {0, 1}")
        if not np.isfinite(out).all():
            raise UnparseableOutcome("outcome vector contains non-finite values")

        schema = tuple(self.schema)
        cov_schemas = [s for s in schema if s.kind == COVARIATE]
        if len(cov_schemas) != p:
            raise DataError(f"schema lists {len(cov_schemas)} covariates for a {p}-column matrix")
        if sum(s.kind == TREATMENT for s in schema) != 1 or sum(s.kind == OUTCOME for s in schema) != 1:
            raise DataError("schema must contain exactly one treatment and one outcome column")
        for j, s in enumerate(cov_schemas):
            col = cov[:, j]
            if col.min() < MISSING_CODE or (col[col >= 0] >= s.code_bound).any():
                raise DataError(f"column '{s.name}' holds codes outside [0, {s.code_bound})")

        for arr in (cov, treat, out, ids):
            arr.setflags(write=False)
        self.covariates, self.treatment, self.outcome = cov, treat, out
        self.schema, self.unit_ids = schema, ids

    # -- shape and schema accessors -------------------------------------------------

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def covariate_schemas(self) -> tuple[ColumnSchema, ...]:
        return tuple(s for s in self.schema if s.kind == COVARIATE)

    @property
    def covariate_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.covariate_schemas)

    @property
    def treatment_name(self) -> str:
        return next(s.name for s in self.schema if s.kind == TREATMENT)

    @property
    def outcome_name(self) -> str:
        return next(s.name for s in self.schema if s.kind == OUTCOME)

    @property
    def code_bounds(self) -> np.ndarray:
        """Per-covariate exclusive code bound (cardinality plus sentinels)."""
        return np.array([s.code_bound for s in self.covariate_schemas], dtype=np.int64)

    @property
    def missing_mask(self) -> np.ndarray:
        return self.covariates == MISSING_CODE

    @property
    def has_missing(self) -> bool:
        return bool((self.covariates == MISSING_CODE).any())

    # -- helpers ---------------------------------------------------------------------

    def decode(self, col: int, code: int, na_token: str = "NA") -> str:
        """Original label for a covariate code; sentinels decode to the NA token."""
        s = self.covariate_schemas[col]
        if 0 <= code < s.cardinality:
            return s.levels[code] if s.levels else str(code)
        return na_token

    def take_rows(self, positions: np.ndarray) -> "EncodedDataset":
        """New dataset restricted to the given row positions (schema shared)."""
        positions = np.asarray(positions, dtype=np.int64)
        return EncodedDataset(
            covariates=self.covariates[positions],
            treatment=self.treatment[positions],
            outcome=self.outcome[positions],
            schema=self.schema,
            unit_ids=self.unit_ids[positions],
        )

    @classmethod
    def from_arrays(
        cls,
        covariates,
        treatment,
        outcome,
        names: list[str] | None = None,
        unit_ids=None,
        treatment_name: str = "treatment",
        outcome_name: str = "outcome",
    ) -> "EncodedDataset":
        """Build a dataset from already-encoded arrays.

        Cardinalities are inferred as ``max(column) + 1`` and labels default to
        the string form of each code.
        """
        cov = np.asarray(covariates, dtype=np.int64)
        if cov.ndim != 2:
            raise DataError("covariates must be a 2-d matrix")
        n, p = cov.shape
        names = list(names) if names is not None else [f"x{j}" for j in range(p)]
        schema = []
        for j in range(p):
            card = int(cov[:, j].max()) + 1 if n else 1
            card = max(card, 1)
            schema.append(
                ColumnSchema(names[j], card, COVARIATE, tuple(str(v) for v in range(card)))
            )
        schema.append(ColumnSchema(treatment_name, 2, TREATMENT, ("0", "1")))
        schema.append(ColumnSchema(outcome_name, 1, OUTCOME))
        if unit_ids is None:
            unit_ids = np.arange(n, dtype=np.int64)
        return cls(cov, treatment, outcome, tuple(schema), unit_ids)


@dataclass(frozen=True)
class MissingPolicy:
    """How to resolve missing covariate cells before matching.

    ``drop`` removes rows with any missing cell; ``sentinel`` gives each
    missing cell a column-unique code above the column's cardinality so that
    it can never match exactly; ``impute`` fills cells with a deterministic
    chained-equations sweep and can emit ``impute_count`` completed datasets.
    """

    mode: str = "drop"
    impute_sweeps: int = 5
    impute_count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("drop", "impute", "sentinel"):
            raise DataError(f"unknown missing-data mode '{self.mode}'")
        if self.impute_sweeps < 1 or self.impute_count < 1:
            raise DataError("impute_sweeps and impute_count must be positive")


@dataclass(frozen=True)
class HoldoutSpec:
    """Where the holdout training set comes from: an external table or a split."""

    source: str = "fraction"
    fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.source not in ("fraction", "external-table"):
            raise DataError(f"unknown holdout source '{self.source}'")
        if self.source == "fraction" and not (0.0 < self.fraction < 1.0):
            raise DataError("holdout fraction must lie strictly between 0 and 1")


def _parse_binary(token: str, row: int, col: str) -> int:
    try:
        value = float(token.strip())
    except ValueError:
        value = math.nan
    if value == 0.0:
        return 0
    if value == 1.0:
        return 1
    raise NonBinaryTreatment(f"treatment column '{col}', row {row}: value {token!r} is not 0/1")


def _parse_outcome(token: str, row: int, col: str) -> float:
    try:
        value = float(token.strip())
    except ValueError:
        raise UnparseableOutcome(
            f"outcome column '{col}', row {row}: value {token!r} is not numeric"
        ) from None
    if not math.isfinite(value):
        raise UnparseableOutcome(f"outcome column '{col}', row {row}: value {token!r} is not finite")
    return value


def load_table(
    path,
    treatment_col: str,
    outcome_col: str,
    *,
    id_col: str | None = None,
    na_tokens: tuple[str, ...] = DEFAULT_NA_TOKENS,
    like: EncodedDataset | None = None,
) -> EncodedDataset:
    """Read a headered CSV file and factor-encode its covariate columns.

    Every column other than the treatment, outcome, and optional id column is
    treated as a discrete covariate and encoded to dense codes in
    first-appearance order.  Cells matching one of ``na_tokens`` are recorded
    as missing (``MISSING_CODE``) for a later policy to resolve.

    Args:
        path: CSV file with a header row (UTF-8).
        treatment_col: name of the binary treatment column.
        outcome_col: name of the numeric outcome column.
        id_col: optional column of unique unit identifiers; row indices are
            used when absent.
        na_tokens: cell contents treated as missing.
        like: when given, reuse this dataset's covariate encoding.  The file
            must carry exactly the same covariate columns, and every observed
            label must already be known to ``like``; otherwise SchemaMismatch.

    Returns:
        An EncodedDataset, possibly with unresolved missing cells.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        rows = [r for r in reader if r]

    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    col_index = {name: i for i, name in enumerate(header)}
    for required in (treatment_col, outcome_col):
        if required not in col_index:
            raise MissingColumn(f"{path}: column '{required}' not found")
    if id_col is not None and id_col not in col_index:
        raise MissingColumn(f"{path}: id column '{id_col}' not found")
    if not rows:
        raise DataError(f"{path}: no data rows")

    special = {treatment_col, outcome_col} | ({id_col} if id_col else set())
    if like is not None:
        for name in like.covariate_names:
            if name not in col_index:
                raise SchemaMismatch(f"{path}: covariate '{name}' missing from table")
        extra = [c for c in header if c not in special and c not in like.covariate_names]
        if extra:
            raise SchemaMismatch(f"{path}: unexpected covariate columns {extra}")
        cov_names = list(like.covariate_names)
        like_levels = [
            {label: code for code, label in enumerate(s.levels)} for s in like.covariate_schemas
        ]
    else:
        cov_names = [c for c in header if c not in special]
        like_levels = None
    if not cov_names:
        raise DataError(f"{path}: no covariate columns besides treatment/outcome/id")

    n, p = len(rows), len(cov_names)
    na_set = set(na_tokens)
    codes = np.empty((n, p), dtype=np.int64)
    levels: list[dict[str, int]] = [dict() for _ in range(p)]
    treatment = np.empty(n, dtype=np.int8)
    outcome = np.empty(n, dtype=np.float64)

    t_idx, y_idx = col_index[treatment_col], col_index[outcome_col]
    cov_idx = [col_index[c] for c in cov_names]
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 1} has {len(row)} fields, expected {len(header)}")
        treatment[i] = _parse_binary(row[t_idx], i + 1, treatment_col)
        outcome[i] = _parse_outcome(row[y_idx], i + 1, outcome_col)
        for j, c in enumerate(cov_idx):
            token = row[c]
            if token in na_set:
                codes[i, j] = MISSING_CODE
            elif like_levels is not None:
                code = like_levels[j].get(token)
                if code is None:
                    raise SchemaMismatch(
                        f"{path}: column '{cov_names[j]}' value {token!r} unknown to the base table"
                    )
                codes[i, j] = code
            else:
                codes[i, j] = levels[j].setdefault(token, len(levels[j]))

    schema: list[ColumnSchema] = []
    for j, name in enumerate(cov_names):
        if like is not None:
            base = like.covariate_schemas[j]
            schema.append(ColumnSchema(name, base.cardinality, COVARIATE, base.levels))
        else:
            ordered = tuple(sorted(levels[j], key=levels[j].get))
            if not ordered:
                raise DataError(f"{path}: covariate '{name}' has no observed values")
            schema.append(ColumnSchema(name, len(ordered), COVARIATE, ordered))
    schema.append(ColumnSchema(treatment_col, 2, TREATMENT, ("0", "1")))
    schema.append(ColumnSchema(outcome_col, 1, OUTCOME))

    if id_col is not None:
        ids = np.array([row[col_index[id_col]] for row in rows], dtype=object)
        if len(set(ids)) != n:
            raise DataError(f"{path}: id column '{id_col}' contains duplicates")
    else:
        ids = np.arange(n, dtype=np.int64)
    return EncodedDataset(codes, treatment, outcome, tuple(schema), ids)


def apply_missing_policy(ds: EncodedDataset, policy: MissingPolicy) -> list[EncodedDataset]:
    """Resolve recorded missing cells, returning one or more completed datasets.

    ``impute`` mode returns ``policy.impute_count`` datasets built with seeds
    ``seed+0 .. seed+m-1``; the other modes return a single dataset.
    """
    if policy.mode == "drop":
        keep = ~ds.missing_mask.any(axis=1)
        if not keep.any():
            raise AllRowsDropped(f"drop policy removed all {ds.n} rows")
        if keep.all():
            return [ds]
        return [ds.take_rows(np.flatnonzero(keep))]

    if policy.mode == "sentinel":
        if not ds.has_missing:
            return [ds]
        codes = np.array(ds.covariates, copy=True)
        schema = list(ds.schema)
        cov_pos = [i for i, s in enumerate(schema) if s.kind == COVARIATE]
        for j in range(ds.p):
            miss = np.flatnonzero(codes[:, j] == MISSING_CODE)
            if len(miss) == 0:
                continue
            base = schema[cov_pos[j]]
            # Row-order assignment keeps sentinel codes deterministic.
            codes[miss, j] = base.cardinality + np.arange(len(miss), dtype=np.int64)
            schema[cov_pos[j]] = replace(base, sentinel_count=len(miss))
        return [EncodedDataset(codes, ds.treatment, ds.outcome, tuple(schema), ds.unit_ids)]

    # impute
    if not ds.has_missing:
        return [ds] * policy.impute_count
    return [
        _impute_once(ds, policy.impute_sweeps, policy.seed + i)
        for i in range(policy.impute_count)
    ]


def _impute_once(ds: EncodedDataset, sweeps: int, seed: int) -> EncodedDataset:
    """One chained-equations completion of the dataset.

    Missing cells start at their column's modal code; each sweep revisits the
    columns with missing cells in index order and re-predicts the cells with
    the default ridge learner fit on the rows observed in that column.  The
    built-in learner is deterministic, so the result does not vary with
    ``seed``; the parameter exists so multiple completions are seeded
    distinctly when a stochastic learner is substituted.
    """
    from .predictive_error import PredictorSpec, fit_ridge, one_hot_design

    lam = PredictorSpec().ridge_lambda
    codes = np.array(ds.covariates, copy=True)
    missing = ds.missing_mask
    cards = np.array([s.cardinality for s in ds.covariate_schemas], dtype=np.int64)
    targets = [j for j in range(ds.p) if missing[:, j].any()]

    for j in targets:
        observed = codes[~missing[:, j], j]
        if len(observed) == 0:
            name = ds.covariate_schemas[j].name
            raise DataError(f"covariate '{name}' has no observed values; cannot impute")
        counts = np.bincount(observed, minlength=cards[j])
        codes[missing[:, j], j] = int(np.argmax(counts))

    del seed  # deterministic built-in learner; see docstring
    for _ in range(sweeps):
        for j in targets:
            others = [c for c in range(ds.p) if c != j]
            if others:
                design = one_hot_design(codes[:, others], cards[others])
            else:
                design = np.zeros((ds.n, 0))
            obs = ~missing[:, j]
            beta = fit_ridge(design[obs], codes[obs, j].astype(np.float64), lam)
            miss_rows = np.flatnonzero(missing[:, j])
            pred = beta[0] + design[miss_rows] @ beta[1:]
            codes[miss_rows, j] = np.clip(np.rint(pred), 0, cards[j] - 1).astype(np.int64)

    return EncodedDataset(codes, ds.treatment, ds.outcome, ds.schema, ds.unit_ids)


def split_holdout(
    ds: EncodedDataset,
    spec: HoldoutSpec,
    external: EncodedDataset | None = None,
) -> tuple[EncodedDataset, EncodedDataset]:
    """Partition rows into (matching, holdout), or validate an external holdout.

    Fraction mode draws ``ceil(fraction * n)`` holdout rows uniformly without
    replacement, deterministically for a given seed.  External mode returns
    ``ds`` unchanged as the matching set after checking that the external
    table's covariate schema is compatible.
    """
    if spec.source == "external-table":
        if external is None:
            raise DataError("holdout source is external-table but no table was given")
        if external.covariate_names != ds.covariate_names:
            raise SchemaMismatch(
                f"holdout covariates {list(external.covariate_names)} != matching covariates "
                f"{list(ds.covariate_names)}"
            )
        for a, b in zip(ds.covariate_schemas, external.covariate_schemas):
            if a.cardinality != b.cardinality:
                raise SchemaMismatch(
                    f"covariate '{a.name}': holdout cardinality {b.cardinality} != {a.cardinality}"
                )
        return ds, external

    n = ds.n
    k = math.ceil(spec.fraction * n)
    if k < 2:
        raise HoldoutTooSmall(f"holdout of {k} row(s) from n={n}; need at least 2")
    if k >= n:
        raise HoldoutTooSmall(f"holdout of {k} rows would leave no matching rows (n={n})")
    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(n)
    holdout_pos = np.sort(perm[:k])
    matching_pos = np.sort(perm[k:])
    return ds.take_rows(matching_pos), ds.take_rows(holdout_pos)


def sample_dataset_path() -> Path:
    """Path of the small CSV dataset bundled with the package."""
    return Path(__file__).parent / "data" / "sample.csv"
