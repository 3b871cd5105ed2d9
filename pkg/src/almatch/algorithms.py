"""Covariate-elimination schedules over the matching engine.

Three schedules share one skeleton: match exactly on all covariates first,
then repeatedly pick a covariate set to match on next, guided by holdout
predictive error (PE) and the balancing factor (BF).

* flame: backward elimination; each iteration drops the single covariate
  whose removal maximizes match quality MQ = C * BF - PE.
* dame: lattice search over drop-sets; each iteration commits the candidate
  drop-set with the lowest PE, generating supersets of processed sets under a
  downward-closure rule.
* hybrid: a fixed number of flame iterations, then dame over the survivors.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .dataset import EncodedDataset
from .errors import DataError, NoAvailableUnits
from .match_engine import MatchState, match_on_set, preview_match
from .predictive_error import PEEvaluator, PredictorSpec

STOP_ALL_MATCHED = "all units matched"
STOP_NO_SETS = "no covariate sets remain"
STOP_FEW_TREATED = "too few unmatched treated units"
STOP_FEW_CONTROL = "too few unmatched control units"
STOP_MAX_ITERATIONS = "iteration limit reached"
STOP_PE_RISE = "predictive error rises too much"
STOP_BF_FLOOR = "balancing factor too low"


@dataclass(frozen=True)
class StoppingRule:
    """Optional early stops; the two mandatory stops are always active.

    Matching always ends when either arm has no unmatched units left or when
    no candidate covariate sets remain.  Each optional field adds one more
    trigger; unset fields never fire.
    """

    max_iterations: int | None = None
    min_unmatched_treated: int | None = None
    min_unmatched_control: int | None = None
    pe_rise_epsilon: float | None = None
    bf_floor: float | None = None

    def __post_init__(self):
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")
        for name in ("min_unmatched_treated", "min_unmatched_control"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.pe_rise_epsilon is not None and self.pe_rise_epsilon < 0:
            raise ValueError("pe_rise_epsilon must be non-negative")
        if self.bf_floor is not None and not (0.0 <= self.bf_floor <= 2.0):
            raise ValueError("bf_floor must lie in [0, 2]")


@dataclass(frozen=True)
class AlgoConfig:
    """Everything a run needs besides the data itself.

    ``c`` trades the balancing factor against predictive error in flame's
    match quality.  ``workers`` parallelizes candidate evaluation within an
    iteration; results are identical for any worker count.
    """

    algorithm: str = "flame"
    c: float = 0.1
    flame_iterations_before_dame: int | None = None
    with_replacement: bool = False
    stopping: StoppingRule = StoppingRule()
    predictor: PredictorSpec = PredictorSpec()
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.algorithm not in ("flame", "dame", "hybrid"):
            raise ValueError(f"unknown algorithm '{self.algorithm}'")
        if self.c < 0:
            raise ValueError("c must be non-negative")
        if self.algorithm == "hybrid":
            if self.flame_iterations_before_dame is None or self.flame_iterations_before_dame < 1:
                raise ValueError("hybrid requires flame_iterations_before_dame >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class IterationRecord:
    """One committed matching pass: what was matched on and how it scored.

    ``dropped_cols`` is cumulative (the full covariate set minus
    ``matched_on``).  ``mq`` is filled for flame-phase records only.
    """

    iteration: int
    phase: str
    dropped_cols: tuple[int, ...]
    matched_on: tuple[int, ...]
    pe: float
    bf: float
    mq: float | None
    n_newly_matched: int
    cumulative_matched: int


@dataclass
class RunResult:
    """A finished run: final state, per-iteration records, and why it stopped."""

    state: MatchState
    records: list[IterationRecord]
    stop_reason: str


def _cols_of(mask: int) -> tuple[int, ...]:
    out = []
    j = 0
    m = mask
    while m:
        if m & 1:
            out.append(j)
        m >>= 1
        j += 1
    return tuple(out)


def _mask_of(cols) -> int:
    mask = 0
    for c in cols:
        mask |= 1 << int(c)
    return mask


class ActiveSetLattice:
    """Frontier of candidate drop-sets with downward-closure bookkeeping.

    A drop-set enters ``active`` only after every subset one element smaller
    has been processed; the full base set is never admitted because dropping
    everything would leave nothing to match on.  Sets are bitmasks over
    covariate indices.
    """

    def __init__(self, base_mask: int):
        self.base = base_mask
        self.processed: set[int] = set()
        self._processed_by_size: dict[int, list[int]] = {}
        self.active: set[int] = {
            1 << j for j in _cols_of(base_mask) if (1 << j) != base_mask
        }

    def mark_processed(self, s: int) -> None:
        self.active.discard(s)
        self.processed.add(s)
        self._processed_by_size.setdefault(s.bit_count(), []).append(s)

    def processed_of_size(self, k: int) -> list[int]:
        return self._processed_by_size.get(k, [])


def generate_new_active_sets(s: int, lattice: ActiveSetLattice) -> set[int]:
    """Supersets of a just-processed drop-set that the closure rule now admits.

    A candidate ``s | {a}`` qualifies when the new element appears in at least
    ``|s|`` processed sets of size ``|s|`` and every size-``|s|`` subset of the
    candidate has been processed.  Already-known sets and the full base set
    are excluded.
    """
    k = s.bit_count()
    processed_k = lattice.processed_of_size(k)
    out = set()
    for a in _cols_of(lattice.base & ~s):
        t = s | (1 << a)
        if t == lattice.base or t in lattice.active or t in lattice.processed:
            continue
        support = sum(1 for m in processed_k if (m >> a) & 1)
        if support < k:
            continue
        if all((t & ~(1 << b)) in lattice.processed for b in _cols_of(t)):
            out.add(t)
    return out


def should_stop(
    state: MatchState,
    ds: EncodedDataset,
    n_candidates: int,
    last_record: IterationRecord,
    stopping: StoppingRule,
    baseline_pe: float,
) -> str | None:
    """Stop reason for the current position, or None to keep going.

    Mandatory conditions are checked before optional ones, so the reported
    reason is the highest-precedence one that holds.  ``baseline_pe`` is the
    predictive error of the full covariate set.
    """
    unmatched_t, unmatched_c = state.unmatched_counts(ds)
    if unmatched_t == 0 or unmatched_c == 0:
        return STOP_ALL_MATCHED
    if n_candidates == 0:
        return STOP_NO_SETS
    if stopping.min_unmatched_treated is not None and unmatched_t <= stopping.min_unmatched_treated:
        return STOP_FEW_TREATED
    if stopping.min_unmatched_control is not None and unmatched_c <= stopping.min_unmatched_control:
        return STOP_FEW_CONTROL
    if stopping.max_iterations is not None and last_record.iteration >= stopping.max_iterations:
        return STOP_MAX_ITERATIONS
    if stopping.pe_rise_epsilon is not None and last_record.pe > (1.0 + stopping.pe_rise_epsilon) * baseline_pe:
        return STOP_PE_RISE
    if stopping.bf_floor is not None and last_record.bf < stopping.bf_floor:
        return STOP_BF_FLOOR
    return None


def exact_match_bootstrap(
    state: MatchState,
    ds: EncodedDataset,
    baseline_pe: float,
    c: float | None = None,
) -> IterationRecord:
    """Iteration 0: match whatever can be matched exactly on all covariates."""
    full = tuple(range(ds.p))
    outcome = match_on_set(state, ds, full, 0)
    mq = None if c is None else c * outcome.bf - baseline_pe
    return IterationRecord(
        iteration=0,
        phase="exact",
        dropped_cols=(),
        matched_on=full,
        pe=baseline_pe,
        bf=outcome.bf,
        mq=mq,
        n_newly_matched=outcome.n_newly_matched,
        cumulative_matched=state.n_matched,
    )


def _check_entry(ds: EncodedDataset) -> None:
    if ds.has_missing:
        raise DataError("dataset has unresolved missing cells; apply a missing-data policy first")
    n_treated = int((ds.treatment == 1).sum())
    if n_treated == 0 or n_treated == ds.n:
        raise NoAvailableUnits(
            f"matching set has {n_treated} treated of {ds.n} units; both arms are required"
        )


def _evaluate_ordered(tasks, workers: int) -> list:
    """Run zero-argument tasks, returning results in task order.

    A thread pool only changes wall time, never results: every task is pure
    and the reduction happens in submission order on the caller's thread.
    """
    if workers <= 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(t) for t in tasks]
        return [f.result() for f in futures]


def _flame_phase(
    ds: EncodedDataset,
    evaluator: PEEvaluator,
    state: MatchState,
    records: list[IterationRecord],
    config: AlgoConfig,
    mask: int,
    baseline_pe: float,
    max_commits: int | None,
) -> tuple[int, str | None]:
    """Backward-elimination iterations; returns (surviving mask, stop reason).

    A None reason means the phase budget ran out with the run still live
    (hybrid hand-off).
    """
    full_mask = (1 << ds.p) - 1
    commits = 0
    while True:
        if max_commits is not None and commits >= max_commits:
            return mask, None
        candidates = list(_cols_of(mask)) if mask.bit_count() >= 2 else []
        reason = should_stop(state, ds, len(candidates), records[-1], config.stopping, baseline_pe)
        if reason is not None:
            return mask, reason

        eligible = state.eligible_positions()

        def make_task(j: int):
            cand_cols = _cols_of(mask & ~(1 << j))

            def task():
                pe = evaluator.evaluate(cand_cols).pe
                bf = preview_match(state, ds, cand_cols, eligible).bf
                return pe, bf

            return task

        results = _evaluate_ordered([make_task(j) for j in candidates], config.workers)
        best_j = best_pe = best_mq = None
        for j, (pe, bf) in zip(candidates, results):
            mq = config.c * bf - pe
            if best_mq is None or mq > best_mq:
                best_j, best_pe, best_mq = j, pe, mq

        mask &= ~(1 << best_j)
        iteration = records[-1].iteration + 1
        outcome = match_on_set(state, ds, _cols_of(mask), iteration)
        records.append(
            IterationRecord(
                iteration=iteration,
                phase="flame",
                dropped_cols=_cols_of(full_mask & ~mask),
                matched_on=_cols_of(mask),
                pe=best_pe,
                bf=outcome.bf,
                mq=config.c * outcome.bf - best_pe,
                n_newly_matched=outcome.n_newly_matched,
                cumulative_matched=state.n_matched,
            )
        )
        commits += 1


def _dame_phase(
    ds: EncodedDataset,
    evaluator: PEEvaluator,
    state: MatchState,
    records: list[IterationRecord],
    config: AlgoConfig,
    base_mask: int,
    baseline_pe: float,
) -> str:
    """Lattice-search iterations over drop-sets of ``base_mask``."""
    full_mask = (1 << ds.p) - 1
    lattice = ActiveSetLattice(base_mask)
    while True:
        reason = should_stop(
            state, ds, len(lattice.active), records[-1], config.stopping, baseline_pe
        )
        if reason is not None:
            return reason

        actives = sorted(lattice.active)

        def make_task(s: int):
            cand_cols = _cols_of(base_mask & ~s)

            def task():
                return evaluator.evaluate(cand_cols).pe

            return task

        results = _evaluate_ordered([make_task(s) for s in actives], config.workers)
        best_key = best_s = best_pe = None
        for s, pe in zip(actives, results):
            key = (pe, s.bit_count(), s)
            if best_key is None or key < best_key:
                best_key, best_s, best_pe = key, s, pe

        matched_mask = base_mask & ~best_s
        iteration = records[-1].iteration + 1
        outcome = match_on_set(state, ds, _cols_of(matched_mask), iteration)
        records.append(
            IterationRecord(
                iteration=iteration,
                phase="dame",
                dropped_cols=_cols_of(full_mask & ~matched_mask),
                matched_on=_cols_of(matched_mask),
                pe=best_pe,
                bf=outcome.bf,
                mq=None,
                n_newly_matched=outcome.n_newly_matched,
                cumulative_matched=state.n_matched,
            )
        )
        lattice.mark_processed(best_s)
        lattice.active |= generate_new_active_sets(best_s, lattice)


def run_flame(ds: EncodedDataset, holdout: EncodedDataset, config: AlgoConfig) -> RunResult:
    """Backward elimination: drop the covariate maximizing MQ each iteration."""
    _check_entry(ds)
    evaluator = PEEvaluator(holdout, config.predictor)
    state = MatchState.new(ds.n, config.with_replacement)
    baseline_pe = evaluator.evaluate(range(ds.p)).pe
    records = [exact_match_bootstrap(state, ds, baseline_pe, config.c)]
    _, reason = _flame_phase(
        ds, evaluator, state, records, config, (1 << ds.p) - 1, baseline_pe, None
    )
    return RunResult(state, records, reason)


def run_dame(ds: EncodedDataset, holdout: EncodedDataset, config: AlgoConfig) -> RunResult:
    """Lattice search: commit the drop-set minimizing PE each iteration."""
    _check_entry(ds)
    evaluator = PEEvaluator(holdout, config.predictor)
    state = MatchState.new(ds.n, config.with_replacement)
    baseline_pe = evaluator.evaluate(range(ds.p)).pe
    records = [exact_match_bootstrap(state, ds, baseline_pe)]
    reason = _dame_phase(
        ds, evaluator, state, records, config, (1 << ds.p) - 1, baseline_pe
    )
    return RunResult(state, records, reason)


def run_hybrid(ds: EncodedDataset, holdout: EncodedDataset, config: AlgoConfig) -> RunResult:
    """A budget of flame iterations, then dame over the surviving covariates."""
    _check_entry(ds)
    evaluator = PEEvaluator(holdout, config.predictor)
    state = MatchState.new(ds.n, config.with_replacement)
    baseline_pe = evaluator.evaluate(range(ds.p)).pe
    records = [exact_match_bootstrap(state, ds, baseline_pe, config.c)]
    mask, reason = _flame_phase(
        ds,
        evaluator,
        state,
        records,
        config,
        (1 << ds.p) - 1,
        baseline_pe,
        config.flame_iterations_before_dame,
    )
    # Running out of covariate sets only ends the flame phase; the lattice
    # decides for itself whether anything remains to search.
    if reason is not None and reason != STOP_NO_SETS:
        return RunResult(state, records, reason)
    reason = _dame_phase(ds, evaluator, state, records, config, mask, baseline_pe)
    return RunResult(state, records, reason)


def run(ds: EncodedDataset, holdout: EncodedDataset, config: AlgoConfig) -> RunResult:
    """Dispatch to the configured algorithm."""
    runner = {"flame": run_flame, "dame": run_dame, "hybrid": run_hybrid}[config.algorithm]
    return runner(ds, holdout, config)
