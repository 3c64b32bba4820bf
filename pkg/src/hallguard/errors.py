"""Shared exception types."""


class CapabilityError(RuntimeError):
    """A metric's required inputs are not present in the log data.

    Distinct from ValueError: the request is well formed, the record simply
    does not carry enough information (e.g. no token distributions from a
    closed-weight API, or a single sample where several are needed).
    """


class ConstraintError(ValueError):
    """A decoding constraint left no permissible token."""


class ConfigError(ValueError):
    """A config or rules file failed load-time validation."""
