"""Exception hierarchy.

Everything data-dependent derives from :class:`ScopeqError` so callers (and
the CLI, which maps them to exit code 2) can distinguish bad data from bugs.
"""


class ScopeqError(Exception):
    """Base class for all pipeline errors."""


class DegenerateInputError(ScopeqError):
    """Input is numerically unusable, e.g. a zero-norm vector."""


class UndefinedLossError(ScopeqError):
    """Contrastive loss requested for a batch too small to define it."""


class ShapeMismatchError(ScopeqError):
    """Array shapes do not chain / do not match the model."""


class DivergenceError(ScopeqError):
    """Training produced a non-finite loss."""


class InfeasibleClusteringError(ScopeqError):
    """Fewer distinct points than requested clusters."""


class InsufficientDataError(ScopeqError):
    """A window or interval holds too little data to aggregate."""


class SamplingError(ScopeqError):
    """Not enough eligible windows to draw the requested sample."""


class DegenerateTrainingError(ScopeqError):
    """Classifier training set contains a single class."""


class RangeError(ScopeqError):
    """A value falls outside the histogram's bin range."""


class OrderingError(ScopeqError):
    """A stream that must be time-sorted is not."""


class ParseError(ScopeqError):
    """A record could not be parsed; message names the offending line."""


class SchemaError(ScopeqError):
    """Records parse but are mutually inconsistent (dimensions, ordering)."""
