class PeakonLabError(ValueError):
    """Base class for every error raised by the lab."""


class ConfigurationError(PeakonLabError):
    """Invalid grid, run configuration or mismatched inputs."""


class ParameterError(PeakonLabError):
    """Invalid model or norm parameter (beta0 = 0, p < 1, ...)."""


class SamplingError(PeakonLabError):
    """A sampled function returned a non-finite value."""


class DomainError(PeakonLabError):
    """A closed-form expression was evaluated outside its domain."""
