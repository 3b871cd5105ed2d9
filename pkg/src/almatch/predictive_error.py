"""Holdout predictive error of covariate subsets, with a closed-form ridge default.

The predictive error of a subset is how badly the outcome is predicted from
only that subset's columns, fit and scored on the holdout set, one model per
treatment arm.  Lower is better; a subset that loses an outcome-relevant
column pays for it here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dataset import EncodedDataset
from .errors import EmptyArm, PredictorFailure

#: Loss contract for pluggable predictors: (codes restricted to the covariate
#: set, outcomes) for one arm's rows -> finite non-negative loss.
PredictorCallback = Callable[[np.ndarray, np.ndarray], float]


@dataclass(frozen=True)
class PredictorSpec:
    """Which learner scores covariate subsets on the holdout.

    The default is ridge regression on one-hot encoded categories with the
    intercept unpenalized.  A callback replaces it entirely: it receives one
    arm's code submatrix and outcomes and must return a finite loss >= 0.
    """

    kind: str = "ridge"
    ridge_lambda: float = 0.1
    callback: PredictorCallback | None = None

    def __post_init__(self):
        if self.kind not in ("ridge", "callback"):
            raise ValueError(f"unknown predictor kind '{self.kind}'")
        if self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be non-negative")
        if self.kind == "callback" and self.callback is None:
            raise ValueError("predictor kind 'callback' requires a callback")


@dataclass(frozen=True)
class PEResult:
    """Per-arm and combined predictive error of one covariate set."""

    pe: float
    pe_treated: float
    pe_control: float
    on_cols: tuple[int, ...]


def one_hot_design(codes: np.ndarray, bounds) -> np.ndarray:
    """Expand a code matrix to indicator columns, one per category per column.

    Column blocks follow the input column order; block j has ``bounds[j]``
    indicator columns for codes ``0..bounds[j]-1``.  No category is dropped
    and no intercept is added.
    """
    codes = np.asarray(codes, dtype=np.int64)
    bounds = np.asarray(bounds, dtype=np.int64)
    n, p = codes.shape
    design = np.zeros((n, int(bounds.sum())), dtype=np.float64)
    offset = 0
    for j in range(p):
        design[np.arange(n), offset + codes[:, j]] = 1.0
        offset += int(bounds[j])
    return design


def fit_ridge(X: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Ridge coefficients with an unpenalized intercept; index 0 is the intercept.

    Solves the penalized normal equations by factorization.  At lam = 0 a
    rank-deficient design resolves to the minimum-norm least-squares solution
    rather than an error.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    design = np.hstack([np.ones((len(y), 1)), X])
    if lam == 0:
        beta, *_ = np.linalg.lstsq(design, y, rcond=None)
        return beta
    gram = design.T @ design
    gram[1:, 1:] += lam * np.eye(design.shape[1] - 1)
    return np.linalg.solve(gram, design.T @ y)


class PEEvaluator:
    """Caches predictive-error results for one holdout table and predictor.

    For the ridge default, the full one-hot gram matrices of each arm are
    built once; any covariate subset is then scored by slicing the gram rather
    than touching the holdout rows again, which keeps the inner loops of the
    matching algorithms cheap.  Safe to call from worker threads: evaluation
    is pure and the cache only ever stores identical values for a given key.
    """

    def __init__(self, holdout: EncodedDataset, spec: PredictorSpec | None = None):
        self.holdout = holdout
        self.spec = spec if spec is not None else PredictorSpec()
        self._cache: dict[tuple[int, ...], PEResult] = {}

        treated = np.flatnonzero(holdout.treatment == 1)
        control = np.flatnonzero(holdout.treatment == 0)
        if len(treated) == 0 or len(control) == 0:
            raise EmptyArm(
                f"holdout has {len(treated)} treated and {len(control)} control rows; "
                "both arms are required to fit predictors"
            )
        self._arm_rows = (treated, control)

        if self.spec.kind == "ridge":
            bounds = holdout.code_bounds
            self._offsets = np.concatenate([[0], np.cumsum(bounds)])
            self._arm_grams = []
            for rows in self._arm_rows:
                design = np.hstack(
                    [np.ones((len(rows), 1)), one_hot_design(holdout.covariates[rows], bounds)]
                )
                y = holdout.outcome[rows]
                self._arm_grams.append(
                    (design.T @ design, design.T @ y, float(y @ y), len(rows))
                )

    def evaluate(self, cols) -> PEResult:
        """Predictive error of the covariate subset ``cols`` (cached)."""
        key = tuple(sorted(int(c) for c in cols))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if self.spec.kind == "ridge":
            losses = [self._ridge_arm_mse(arm, key) for arm in (0, 1)]
        else:
            losses = [self._callback_arm_loss(arm, key) for arm in (0, 1)]
        result = PEResult(
            pe=losses[0] + losses[1],
            pe_treated=losses[0],
            pe_control=losses[1],
            on_cols=key,
        )
        return self._cache.setdefault(key, result)

    def _ridge_arm_mse(self, arm: int, cols: tuple[int, ...]) -> float:
        gram, right, yy, n = self._arm_grams[arm]
        idx = np.concatenate(
            [[0]] + [np.arange(self._offsets[c] + 1, self._offsets[c + 1] + 1) for c in cols]
        )
        sub_gram = gram[np.ix_(idx, idx)]
        sub_right = right[idx]
        lam = self.spec.ridge_lambda
        if lam == 0:
            beta = np.linalg.pinv(sub_gram, hermitian=True) @ sub_right
        else:
            penalized = sub_gram.copy()
            penalized[1:, 1:] += lam * np.eye(len(idx) - 1)
            beta = np.linalg.solve(penalized, sub_right)
        mse = (yy - 2.0 * (beta @ sub_right) + beta @ sub_gram @ beta) / n
        return max(0.0, float(mse))

    def _callback_arm_loss(self, arm: int, cols: tuple[int, ...]) -> float:
        rows = self._arm_rows[arm]
        codes = self.holdout.covariates[np.ix_(rows, list(cols))]
        loss = self.spec.callback(codes, self.holdout.outcome[rows])
        try:
            loss = float(loss)
        except (TypeError, ValueError):
            raise PredictorFailure(f"predictor returned non-numeric loss {loss!r}") from None
        if not math.isfinite(loss) or loss < 0:
            raise PredictorFailure(f"predictor returned invalid loss {loss!r}")
        return loss


def predictive_error(
    holdout: EncodedDataset,
    cols,
    spec: PredictorSpec | None = None,
) -> PEResult:
    """One-shot predictive error of a covariate subset on a holdout table."""
    return PEEvaluator(holdout, spec).evaluate(cols)
