"""Exception types shared across the package."""


class ZivrError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(ZivrError, ValueError):
    """An argument is outside its documented range or inconsistent."""


class EvaluationError(ZivrError, ArithmeticError):
    """A function oracle returned a non-finite value."""


class ParseError(ZivrError, ValueError):
    """A dataset file is malformed.

    Carries the 1-based line number when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(ZivrError, ValueError):
    """Dataset content violates the expected schema (e.g. a bad label)."""


class InputError(ZivrError, ValueError):
    """Dataset-level precondition violated (e.g. empty data, bad times)."""


class CapabilityError(ZivrError, RuntimeError):
    """The requested computation is not available or not tractable."""


class DivergenceError(ZivrError, RuntimeError):
    """A solver run blew up; carries the last finite state and partial trace."""

    def __init__(self, message, state=None, trace=None):
        super().__init__(message)
        self.state = state
        self.trace = trace
