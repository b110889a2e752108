"""Exception types shared across the toolkit."""


class PelabError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(PelabError, ValueError):
    """An argument violates an operation's preconditions (non-finite, wrong shape...)."""


class ContractViolationError(PelabError, RuntimeError):
    """A caller broke an interface contract (e.g. acting for a deactivated agent)."""


class ConfigurationError(PelabError, ValueError):
    """A configuration is inconsistent or cannot be realized (e.g. spawn infeasible)."""


class WeightFormatError(PelabError, ValueError):
    """A serialized network file is malformed, truncated or version-incompatible."""


class TrainingError(PelabError, RuntimeError):
    """Training aborted, e.g. on a non-finite loss; carries diagnostics in the message."""


class DivergenceError(PelabError, RuntimeError):
    """A replay diverged from its recorded trace."""

    def __init__(self, message: str, step: int | None = None, field: str | None = None):
        super().__init__(message)
        self.step = step
        self.field = field
