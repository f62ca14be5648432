"""Exception hierarchy for the engine.

Everything raised on a domain-level failure derives from :class:`BlindIQError`
so the CLI can map any of them to exit code 1.
"""


class BlindIQError(Exception):
    """Base class for all engine errors."""


class ShapeError(BlindIQError):
    """A tensor dimension does not match what an operation requires."""


class NonFiniteError(BlindIQError):
    """An operation produced (or received) NaN/Inf values."""


class ColorSpaceError(BlindIQError):
    """An image arrived in the wrong color space for a conversion."""


class DegenerateInputError(BlindIQError):
    """A statistic is undefined for this input (e.g. constant vector)."""


class WeightsFileError(BlindIQError):
    """Base class for weights-file format violations."""


class BadMagicError(WeightsFileError):
    pass


class VersionMismatchError(WeightsFileError):
    pass


class UnsupportedDtypeError(WeightsFileError):
    pass


class DuplicateTensorError(WeightsFileError):
    pass


class TruncatedPayloadError(WeightsFileError):
    pass


class WeightsValidationError(BlindIQError):
    """A weight store does not match the tensors an architecture expects."""


class ModelConfigError(BlindIQError):
    """Model config file is missing, malformed, or inconsistent."""


class ManifestError(BlindIQError):
    """Dataset manifest is malformed; message carries the line number."""


class DecodeError(BlindIQError):
    """Image file cannot be decoded."""


class TrainingError(BlindIQError):
    """Optimization failed (e.g. NaN gradient at a given step)."""
