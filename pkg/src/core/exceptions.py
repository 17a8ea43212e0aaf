"""Error hierarchy shared by the library and the command line."""


class SiegelFlowError(Exception):
    """Base class; `exit_code` is what the CLI returns for it."""

    exit_code = 1


class InputError(SiegelFlowError, ValueError):
    exit_code = 2


class DomainError(InputError):
    """The requested quantity is not defined for this input."""


class IncompleteTableError(InputError):
    pass


class ConsistencyError(SiegelFlowError):
    """Two routes to the same number disagree."""

    exit_code = 1


class NotFoundError(SiegelFlowError):
    exit_code = 1


class BudgetExceededError(SiegelFlowError):
    exit_code = 3

    def __init__(self, message: str, partial: dict | None = None):
        super().__init__(message)
        self.partial = partial or {}
