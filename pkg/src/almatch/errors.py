"""Exception types shared across the package."""


class AlmatchError(Exception):
    """Base class for every error this package raises deliberately."""


class DataError(AlmatchError):
    """Input data is malformed, inconsistent, or unusable as provided."""


class MissingColumn(DataError):
    """A named column is absent from the table."""


class NonBinaryTreatment(DataError):
    """The treatment column contains a value other than 0 or 1."""


class UnparseableOutcome(DataError):
    """The outcome column contains a value that is not a finite number."""


class AllRowsDropped(DataError):
    """The drop missing-data policy removed every row."""


class SchemaMismatch(DataError):
    """Two tables that must share a covariate schema do not."""


class HoldoutTooSmall(DataError):
    """The requested holdout split is too small to be usable."""


class EmptyArm(DataError):
    """A dataset lacks treated or control units where both are required."""


class PredictorFailure(AlmatchError):
    """A pluggable predictor returned a loss that is not a finite non-negative number."""


class NoAvailableUnits(AlmatchError):
    """No eligible treated or control units remain for matching."""


class NoMatches(AlmatchError):
    """Effect estimation was requested but no matched groups exist."""


class UnitUnmatched(AlmatchError):
    """A per-unit quantity was requested for a unit that was never matched."""
