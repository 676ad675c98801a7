"""Exception hierarchy for the fusion engine.

Every error raised by this package derives from :class:`ScoreFuseError` and
carries a short machine-readable ``code`` used by the CLI to pick exit codes
and to print one parseable line on stderr.
"""

from __future__ import annotations


class ScoreFuseError(Exception):
    """Base class for all package errors."""

    code = "E_VALIDATION"


class FormatError(ScoreFuseError):
    """A file does not conform to its documented layout (header, arity, syntax)."""

    code = "E_FORMAT"


class ValidationError(ScoreFuseError):
    """Structurally well-formed input that violates a semantic contract."""

    code = "E_VALIDATION"


class IoError(ScoreFuseError):
    """File system failure while reading or writing an artifact."""

    code = "E_IO"


class NumericError(ScoreFuseError):
    """A computation produced a non-finite or otherwise unusable number."""

    code = "E_NUMERIC"


# -- probability vectors -----------------------------------------------------

class AllZeroError(ValidationError):
    """Renormalization asked of a vector whose entries are all zero."""


class NegativeScoreError(ValidationError):
    """A probability or raw score is negative."""


# -- tables and alignment ----------------------------------------------------

class LabelMismatchError(ValidationError):
    """Tables disagree on their label space or true labels."""


class LabelSpaceMismatchError(ValidationError):
    """An operation received a label space it cannot interpret."""


class MisalignedError(ValidationError):
    """Tables that must share a sample axis do not."""


class MissingLabelsError(ValidationError):
    """True labels are required but absent."""


# -- images ------------------------------------------------------------------

class UnsupportedFormatError(IoError):
    """Image file is not an 8-bit grayscale/RGB PNG or a P5 PGM."""


class EmptyImageError(ValidationError):
    """An image with zero pixels cannot be processed."""


# -- learners and combiners --------------------------------------------------

class DimensionMismatchError(ValidationError):
    """Feature/parameter dimensions do not agree."""


class EmptyDatasetError(ValidationError):
    """Training requires at least one sample."""


class AllZeroWeightsError(ValidationError):
    """Sample weights must not all be zero."""


class EmptyVotesError(ValidationError):
    """Majority voting requires at least one vote."""


class EmptyInputError(ValidationError):
    """A fusion rule received no model outputs."""


class WeightMismatchError(ValidationError):
    """Number of combiner weights differs from number of models."""


class BadWeightsError(ValidationError):
    """Combiner weights are negative or do not sum to one."""


class DegenerateFirstRoundError(NumericError):
    """Boosting's first learner is no better than chance."""


class NonFiniteLossError(NumericError):
    """Training loss became NaN or infinite."""


# -- evaluation --------------------------------------------------------------

class EmptyMatrixError(ValidationError):
    """Metrics require a confusion matrix with at least one count."""


class TinyClassError(ValidationError):
    """Stratified splitting requires every class to have at least two samples."""
