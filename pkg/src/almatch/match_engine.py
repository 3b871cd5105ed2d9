"""Exact-signature grouping on covariate subsets, match state, balancing factors.

Units agree on a covariate subset when their codes are equal on every column
in it.  Agreement is decided through a mixed-radix signature packed into a
single unsigned integer per unit; when the radix range would overflow, the
engine falls back to exact unique-row grouping with the same group ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import EncodedDataset
from .errors import DataError, NoAvailableUnits

_U64_RANGE = 1 << 64


def _radix_weights(bounds: np.ndarray) -> np.ndarray | None:
    """Mixed-radix place values, or None when they overflow 64-bit range.

    The first column is the least significant digit; weight j is the product
    of the bounds of all preceding columns.  Computed with exact Python ints.
    """
    weights = []
    prod = 1
    for b in bounds:
        weights.append(prod)
        prod *= int(b)
    if prod > _U64_RANGE:
        return None
    return np.array(weights, dtype=np.uint64)


def group_labels(codes: np.ndarray, bounds: np.ndarray) -> tuple[np.ndarray, int]:
    """Dense group index per row for exact-tuple equality over all columns.

    Returns ``(labels, n_groups)`` with labels in ``0..n_groups-1``.  Label
    order is ascending mixed-radix signature (first column least significant).
    The overflow fallback groups by exact row tuples over the reversed column
    order, which sorts identically, so both paths label groups the same way.
    """
    codes = np.asarray(codes)
    if codes.ndim != 2 or codes.shape[1] == 0:
        raise DataError("grouping requires a nonempty covariate selection")
    weights = _radix_weights(np.asarray(bounds))
    if weights is not None:
        sig = codes.astype(np.uint64) @ weights
        uniq, inv = np.unique(sig, return_inverse=True)
    else:
        uniq, inv = np.unique(codes[:, ::-1], axis=0, return_inverse=True)
    return inv.reshape(-1), len(uniq)


def compute_signatures(ds: EncodedDataset, cols) -> np.ndarray:
    """Per-unit signature identifying each unit's values on the given columns.

    Two units receive equal signatures exactly when their codes agree on every
    selected column.  Values are the packed mixed-radix codes when those fit
    the unsigned 64-bit range, and dense group indices otherwise.
    """
    cols = _as_cols(cols, ds.p)
    sub = ds.covariates[:, cols]
    bounds = ds.code_bounds[list(cols)]
    weights = _radix_weights(bounds)
    if weights is not None:
        return sub.astype(np.uint64) @ weights
    labels, _ = group_labels(sub, bounds)
    return labels.astype(np.uint64)


def _as_cols(cols, p: int) -> tuple[int, ...]:
    out = tuple(sorted(int(c) for c in cols))
    if not out:
        raise DataError("covariate set is empty; matching on no columns is not defined")
    if out[0] < 0 or out[-1] >= p or len(set(out)) != len(out):
        raise DataError(f"covariate indices {out} invalid for p={p}")
    return out


@dataclass(frozen=True, eq=False)
class MatchedGroup:
    """Units identical on ``on_cols``, holding at least one unit of each arm.

    ``signature_values`` pins the shared codes as (column, code) pairs; the
    row arrays index into the matching dataset and are sorted ascending.
    """

    iteration: int
    on_cols: tuple[int, ...]
    signature_values: tuple[tuple[int, int], ...]
    treated_rows: np.ndarray
    control_rows: np.ndarray

    @property
    def n_treated(self) -> int:
        return len(self.treated_rows)

    @property
    def n_control(self) -> int:
        return len(self.control_rows)

    @property
    def size(self) -> int:
        return len(self.treated_rows) + len(self.control_rows)

    @property
    def members(self) -> np.ndarray:
        """All member row positions, ascending."""
        return np.sort(np.concatenate([self.treated_rows, self.control_rows]))


@dataclass
class MatchState:
    """Per-unit match bookkeeping accumulated over algorithm iterations.

    ``main_group[u]`` indexes ``groups`` for the earliest group containing
    unit u (-1 while unmatched); ``first_iteration[u]`` is the iteration of
    that group.  Without replacement a unit joins at most one group; with
    replacement it stays eligible and may join several, but its main group
    never changes once set.
    """

    with_replacement: bool
    matched: np.ndarray
    main_group: np.ndarray
    first_iteration: np.ndarray
    groups: list[MatchedGroup] = field(default_factory=list)

    @classmethod
    def new(cls, n: int, with_replacement: bool) -> "MatchState":
        return cls(
            with_replacement=with_replacement,
            matched=np.zeros(n, dtype=bool),
            main_group=np.full(n, -1, dtype=np.int64),
            first_iteration=np.full(n, -1, dtype=np.int64),
        )

    @property
    def n_matched(self) -> int:
        return int(self.matched.sum())

    def eligible_positions(self) -> np.ndarray:
        """Row positions still available for grouping, ascending."""
        if self.with_replacement:
            return np.arange(len(self.matched), dtype=np.int64)
        return np.flatnonzero(~self.matched)

    def unmatched_counts(self, ds: EncodedDataset) -> tuple[int, int]:
        """Counts of never-matched (treated, control) units."""
        un = ~self.matched
        t = int((un & (ds.treatment == 1)).sum())
        return t, int(un.sum()) - t


def form_groups(
    ds: EncodedDataset,
    cols,
    eligible: np.ndarray,
    iteration: int,
) -> list[MatchedGroup]:
    """Bucket eligible rows by their codes on ``cols``; keep two-arm buckets.

    Buckets containing at least one treated and one control unit become
    MatchedGroups in ascending signature order; the rest are discarded.
    """
    cols = _as_cols(cols, ds.p)
    eligible = np.asarray(eligible, dtype=np.int64)
    if len(eligible) == 0:
        return []
    sub = ds.covariates[np.ix_(eligible, cols)]
    labels, n_buckets = group_labels(sub, ds.code_bounds[list(cols)])
    treat = ds.treatment[eligible]
    t_counts = np.bincount(labels[treat == 1], minlength=n_buckets)
    c_counts = np.bincount(labels[treat == 0], minlength=n_buckets)
    valid = (t_counts > 0) & (c_counts > 0)
    if not valid.any():
        return []

    keep = valid[labels]
    rows = eligible[keep]
    labs = labels[keep]
    order = np.argsort(labs, kind="stable")
    rows, labs = rows[order], labs[order]
    cuts = np.flatnonzero(np.diff(labs)) + 1
    groups = []
    for seg in np.split(rows, cuts):
        arm = ds.treatment[seg] == 1
        sig = tuple((c, int(ds.covariates[seg[0], c])) for c in cols)
        groups.append(
            MatchedGroup(
                iteration=iteration,
                on_cols=cols,
                signature_values=sig,
                treated_rows=seg[arm],
                control_rows=seg[~arm],
            )
        )
    return groups


def balancing_factor(
    groups: list[MatchedGroup],
    available_treated: int,
    available_control: int,
) -> float:
    """Sum of matched proportions of the available treated and control units.

    Counts distinct units across the given groups; result lies in [0, 2].
    """
    if available_treated < 1 or available_control < 1:
        raise NoAvailableUnits(
            f"availability is (treated={available_treated}, control={available_control})"
        )
    if not groups:
        return 0.0
    t = len(np.unique(np.concatenate([g.treated_rows for g in groups])))
    c = len(np.unique(np.concatenate([g.control_rows for g in groups])))
    return t / available_treated + c / available_control


@dataclass(frozen=True)
class MatchOutcome:
    """What one committed matching pass produced."""

    bf: float
    matched_treated: int
    matched_control: int
    n_new_groups: int
    n_newly_matched: int


def preview_match(
    state: MatchState,
    ds: EncodedDataset,
    cols,
    eligible: np.ndarray | None = None,
) -> MatchOutcome:
    """Counts and balancing factor of matching on ``cols``, without mutating.

    ``eligible`` may be passed to reuse one snapshot across several candidate
    evaluations of the same iteration.
    """
    cols = _as_cols(cols, ds.p)
    if eligible is None:
        eligible = state.eligible_positions()
    treat = ds.treatment[eligible]
    avail_t = int((treat == 1).sum())
    avail_c = len(treat) - avail_t
    if avail_t == 0 or avail_c == 0:
        raise NoAvailableUnits(
            f"availability is (treated={avail_t}, control={avail_c})"
        )
    sub = ds.covariates[np.ix_(eligible, cols)]
    labels, n_buckets = group_labels(sub, ds.code_bounds[list(cols)])
    t_counts = np.bincount(labels[treat == 1], minlength=n_buckets)
    c_counts = np.bincount(labels[treat == 0], minlength=n_buckets)
    valid = (t_counts > 0) & (c_counts > 0)
    mt = int(t_counts[valid].sum())
    mc = int(c_counts[valid].sum())
    newly = int((~state.matched[eligible] & valid[labels]).sum())
    return MatchOutcome(
        bf=mt / avail_t + mc / avail_c,
        matched_treated=mt,
        matched_control=mc,
        n_new_groups=int(valid.sum()),
        n_newly_matched=newly,
    )


def match_on_set(
    state: MatchState,
    ds: EncodedDataset,
    cols,
    iteration: int,
) -> MatchOutcome:
    """Form groups on ``cols`` among eligible units and commit them to state.

    Eligibility is all units with replacement, never-matched units without.
    Appends groups, flips matched flags, and sets main_group/first_iteration
    for units matched for the first time.  Returns this call's counts and
    balancing factor (proportions of this call's availability).
    """
    cols = _as_cols(cols, ds.p)
    eligible = state.eligible_positions()
    treat = ds.treatment[eligible]
    avail_t = int((treat == 1).sum())
    avail_c = len(treat) - avail_t
    if avail_t == 0 or avail_c == 0:
        raise NoAvailableUnits(
            f"availability is (treated={avail_t}, control={avail_c})"
        )
    new_groups = form_groups(ds, cols, eligible, iteration)
    base_id = len(state.groups)
    mt = mc = newly = 0
    for k, g in enumerate(new_groups):
        members = g.members
        fresh = members[state.main_group[members] == -1]
        state.main_group[fresh] = base_id + k
        state.first_iteration[fresh] = iteration
        state.matched[members] = True
        mt += g.n_treated
        mc += g.n_control
        newly += len(fresh)
    state.groups.extend(new_groups)
    return MatchOutcome(
        bf=mt / avail_t + mc / avail_c,
        matched_treated=mt,
        matched_control=mc,
        n_new_groups=len(new_groups),
        n_newly_matched=newly,
    )
