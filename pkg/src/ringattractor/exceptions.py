"""Exception types raised across the package."""


class ConfigError(ValueError):
    """Invalid model configuration; carries every violation found."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class PreconditionError(ValueError):
    """An operation was called outside its domain."""


class NumericalError(ArithmeticError):
    """Non-finite or overflowing state during integration."""

    def __init__(self, message, step_index=None, time=None):
        super().__init__(message)
        self.step_index = step_index
        self.time = time


class DivergenceError(NumericalError):
    """The trajectory escaped the norm bound at ``escape_time``."""

    def __init__(self, escape_time, state):
        super().__init__(
            f"trajectory norm exceeded bound at t={escape_time:.6g}", time=escape_time
        )
        self.escape_time = escape_time
        self.state = state
