"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A scenario, preset, or config file violates a structural constraint."""


class MalformedTraceError(ValueError):
    """A trace is structurally unusable (distinct from a dependency violation)."""
