"""Exception types shared across the package."""


class ConfigError(ValueError):
    """An experiment configuration is malformed or inconsistent."""


class MatroidContractError(RuntimeError):
    """A matroid oracle violated a guaranteed property (broken instance, not bad luck)."""


class IndependenceViolation(RuntimeError):
    """A scheme produced a dependent accepted set; the whole experiment is aborted."""
