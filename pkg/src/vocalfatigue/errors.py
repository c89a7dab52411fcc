"""Exception hierarchy shared by all vocalfatigue modules.

Two broad families matter for the CLI exit-code contract: I/O and
environment problems (exit code 1) versus domain and validation errors
(exit code 2).
"""


class VocalFatigueError(Exception):
    """Base class for all errors raised by this package."""


class IoError(VocalFatigueError):
    """A file could not be read or written."""


class FormatError(VocalFatigueError):
    """A binary or JSON artifact does not match its documented layout."""


class TruncatedFile(FormatError):
    """A file header declares more payload than the file contains."""


class InvalidValue(VocalFatigueError):
    """A value violates a domain invariant (non-finite, wrong range, ...)."""


class DimMismatch(InvalidValue):
    """Vector or matrix dimensions do not agree."""


class LengthMismatch(InvalidValue):
    """Paired containers have different lengths."""


class ProvenanceError(InvalidValue):
    """Recording ids of two artifacts that must match do not."""


class EmptySlice(InvalidValue):
    """A time slice selects no frames."""


class WindowTooLarge(InvalidValue):
    """A smoothing window spans more frames than the sequence has."""


class RecordingTooShort(InvalidValue):
    """A recording does not meet the minimum duration of an experiment."""


class OverlappingWindows(InvalidValue):
    """Label windows overlap, so frames would get ambiguous classes."""


class BadComponentCount(InvalidValue):
    """Requested PCA component count is outside [1, min(n_samples, dim)]."""


class DegenerateLabels(InvalidValue):
    """Training data contains fewer than two classes."""


class TooFewSamples(InvalidValue):
    """Not enough samples per class for the requested cross-validation."""


class PerplexityTooLarge(InvalidValue):
    """t-SNE perplexity is infeasible for the input size."""


class TooFewPoints(InvalidValue):
    """t-SNE needs at least four input points."""
