"""Exception types shared across the package."""


class NcelmError(Exception):
    """Base class for all package errors."""


class DataError(NcelmError, ValueError):
    """Malformed or unusable input data."""


class ConfigError(NcelmError, ValueError):
    """Invalid hyperparameters or run configuration."""


class NumericalDegeneracyError(NcelmError, ArithmeticError):
    """An SPD factorization or inner solve failed.

    The keyword context (learner index, iteration, ``lam``, ``C``, norms)
    is kept on ``context`` and appended to the message.
    """

    def __init__(self, message, **context):
        self.context = context
        if context:
            details = ", ".join(f"{k}={v!r}" for k, v in context.items())
            message = f"{message} ({details})"
        super().__init__(message)
