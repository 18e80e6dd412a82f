"""Exception hierarchy shared by all adasense modules."""


class AdaSenseError(Exception):
    """Base class for library errors."""


class DimensionError(AdaSenseError, ValueError):
    """Array shapes do not agree."""


class InvalidInputError(AdaSenseError, ValueError):
    """Input contains NaN/Inf or violates a precondition."""


class InfeasibleMeasurementError(AdaSenseError):
    """Measurements cannot be produced by any signal in the prior's support."""


class ExhaustedCandidatesError(AdaSenseError):
    """Fewer unused candidates remain than a step requires."""


class ConfigError(AdaSenseError):
    """Experiment configuration is invalid."""
