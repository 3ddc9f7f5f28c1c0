"""Exception hierarchy shared by all modules.

Errors are split into input/domain problems (bad data handed to a routine)
and numerical failures (the computation itself broke down).  The command line
front end maps the two families to different exit codes.
"""


class LagfocalError(Exception):
    """Base class for every error raised by the package."""


class InputError(LagfocalError, ValueError):
    """Malformed input: wrong shapes, dimension mismatch, bad parameters."""


class DomainError(InputError):
    """A model was evaluated outside its coordinate chart."""


class ConfigError(InputError):
    """A run configuration could not be parsed or failed validation."""


class NumericalError(LagfocalError, ArithmeticError):
    """A numerical procedure failed; carries an optional time stamp."""

    def __init__(self, message, *, module=None, time=None):
        super().__init__(message)
        self.module = module
        self.time = time

    def __str__(self):
        text = super().__str__()
        extra = []
        if self.module is not None:
            extra.append(f"module={self.module}")
        if self.time is not None:
            extra.append(f"t={self.time:.12g}")
        return f"{text} ({', '.join(extra)})" if extra else text


class TransversalityError(NumericalError):
    pass


class RegularityError(NumericalError):
    pass


class ChartError(NumericalError):
    pass


class NormalizationError(NumericalError):
    pass


class ReductionDegeneracyError(NumericalError):
    pass


class IntegrationError(NumericalError):
    pass


class MonotonicityError(NumericalError):
    pass


class CalibrationError(NumericalError):
    pass
