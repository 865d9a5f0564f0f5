"""Exception family shared by every cotest module."""


class CoTestError(Exception):
    """Base class for all errors raised by cotest."""


class DatasetError(CoTestError, ValueError):
    """Malformed example/views/task files or invalid dataset invariants."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StratificationError(DatasetError):
    """A class has fewer labeled examples than the requested number of folds."""


class TrainingError(CoTestError, ValueError):
    """A base learner could not be trained on the given examples."""


class InconsistentTrainingSetError(TrainingError):
    """No rule in the hypothesis space covers every training document."""


class ContractError(CoTestError, RuntimeError):
    """A strategy was paired with a learner lacking a required capability."""


class NoContentionError(CoTestError):
    """select_query was asked to choose from an empty contention set."""


class ComparisonError(CoTestError, ValueError):
    """Two sets of learning curves cannot be compared point by point."""


class ConfigError(CoTestError, ValueError):
    """Invalid experiment configuration or generator spec."""
