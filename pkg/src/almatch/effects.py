"""Treatment-effect estimates read off a finished match state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import EncodedDataset
from .errors import NoMatches, UnitUnmatched
from .match_engine import MatchedGroup, MatchState


@dataclass(frozen=True)
class EffectEstimate:
    """A point estimate plus how many units and groups contributed to it."""

    kind: str
    value: float
    n_units: int
    n_groups: int


def group_cate(g: MatchedGroup, outcome: np.ndarray) -> float:
    """Treated-minus-control mean outcome inside one matched group."""
    return float(outcome[g.treated_rows].mean() - outcome[g.control_rows].mean())


def unit_cate(state: MatchState, ds: EncodedDataset, row: int) -> float:
    """Effect estimate for one unit: the CATE of its main matched group."""
    gid = int(state.main_group[row])
    if gid < 0:
        raise UnitUnmatched(f"unit at row {row} was never matched")
    return group_cate(state.groups[gid], ds.outcome)


def _main_group_weights(state: MatchState) -> np.ndarray:
    """Units counted toward each group through their main-group membership."""
    assigned = state.main_group[state.main_group >= 0]
    return np.bincount(assigned, minlength=len(state.groups))


def ate(state: MatchState, ds: EncodedDataset) -> EffectEstimate:
    """Average treatment effect over all matched units.

    Group CATEs are weighted by the number of units whose main group is that
    group, so every matched unit contributes exactly once even when matching
    ran with replacement.
    """
    if not state.groups:
        raise NoMatches("no matched groups; cannot estimate ATE")
    weights = _main_group_weights(state)
    total = int(weights.sum())
    if total == 0:
        raise NoMatches("no units hold a main group; cannot estimate ATE")
    cates = np.array([group_cate(g, ds.outcome) for g in state.groups])
    value = float((weights * cates).sum() / total)
    return EffectEstimate("ate", value, n_units=total, n_groups=int((weights > 0).sum()))


def att(state: MatchState, ds: EncodedDataset) -> EffectEstimate:
    """Average treatment effect on the treated: mean unit CATE over matched treated units."""
    rows = np.flatnonzero(state.matched & (ds.treatment == 1))
    if len(rows) == 0:
        raise NoMatches("no matched treated units; cannot estimate ATT")
    cates = np.array([group_cate(g, ds.outcome) for g in state.groups])
    main = state.main_group[rows]
    value = float(cates[main].mean())
    return EffectEstimate("att", value, n_units=len(rows), n_groups=len(np.unique(main)))
