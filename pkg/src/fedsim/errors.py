"""Exception hierarchy shared across the simulator."""


class FedsimError(Exception):
    """Base class for all errors raised by fedsim."""


class ShapeMismatchError(FedsimError):
    """Parameter vectors with different shape ids were combined."""


class DatasetError(FedsimError):
    """A dataset violates a precondition (empty, bad labels, malformed file)."""


class PartitionError(FedsimError):
    """A partition scheme could not give every client at least one sample."""


class DegenerateDirectionError(FedsimError):
    """An attack needed a perturbation direction but the mean update is zero."""


class ReviewReportError(FedsimError):
    """A review report was rejected (e.g. its ranking is not a permutation)."""


class ConfigError(FedsimError):
    """An experiment configuration is invalid or could not be parsed."""


class RoundError(FedsimError):
    """A training round failed; the message carries the round index."""
