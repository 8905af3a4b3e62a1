"""Exception types shared across the package."""


class SddeError(Exception):
    """Base class for all package-specific errors."""


class HistoryOverrunError(SddeError):
    """A history was evaluated beyond its last computed node.

    This always signals a solver bug, never bad user input.
    """


class DelayDomainError(SddeError):
    """The threshold exceeds the integrable survival mass of the history."""


class ModelContractError(SddeError):
    """A model callback returned values violating its declared contract."""


class OrderingError(SddeError):
    """Two histories expected to be pointwise ordered are not."""


class ContractionFailure(SddeError):
    """A fixed-point window failed to contract.

    The driver reacts by halving the substep; only if the substep floor is
    reached does this surface to the caller.
    """

    def __init__(self, message, iterations=None, ratios=None):
        super().__init__(message)
        self.iterations = iterations
        self.ratios = ratios or []


class ConfigError(SddeError):
    """A run configuration failed validation."""
