class ConfigError(ValueError):
    """Invalid configuration or out-of-range argument."""


class ContractError(RuntimeError):
    """An operation was called in a state its contract forbids."""


class InvariantError(RuntimeError):
    """A run-time invariant check failed; the run is aborted."""
