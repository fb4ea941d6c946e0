"""Exception types shared across the simulator."""


class DomainError(ValueError):
    """An argument lies outside the domain of a physical model."""


class ConfigError(ValueError):
    """A scenario or parameter file is malformed or incomplete."""
