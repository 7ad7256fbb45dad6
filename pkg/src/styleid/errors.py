"""Exception types shared across the package.

Each error carries the CLI exit code it maps to.
"""


class StyleIDError(Exception):
    exit_code = 1


class InvalidArgumentError(StyleIDError, ValueError):
    exit_code = 2


class NumericalError(StyleIDError, ArithmeticError):
    exit_code = 4

    def __init__(self, message, step=None, unit="step"):
        if step is not None:
            message = f"{message} ({unit} {step})"
        super().__init__(message)
        self.step = step


class FormatError(StyleIDError, IOError):
    exit_code = 3
