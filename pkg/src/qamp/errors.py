"""Exception types shared across the package."""


class QampError(Exception):
    """Base class for all errors raised by this package."""


class SizeError(QampError):
    """Qubit count outside the supported range."""


class ShapeMismatchError(QampError):
    """Operands defined over different state-space dimensions."""


class NormalizationError(QampError):
    """State norm drifted too far from 1 for the requested operation."""


class DegenerateMaskError(QampError):
    """Selection mask is empty or full where a two-component split is required."""


class NoSolutionError(QampError):
    """Search requested over an empty marked set with the count assumed known."""


class ValidityError(QampError):
    """A dynamic round would start from a state breaking the progress conditions.

    Carries the state and the log accumulated before the offending round.
    """

    def __init__(self, message, state=None, log=None, round_index=None):
        super().__init__(message)
        self.state = state
        self.log = log
        self.round_index = round_index
        self.incumbent = None


class InvalidParamsError(QampError):
    """Selection-probability parameters violate the boundary requirements."""


class CalibrationError(QampError):
    """No decay rate meets the requested expected selection count."""


class UnderAmplifiedError(QampError):
    """Sampling cap exhausted before enough distinct items were collected."""


class ConfigError(QampError):
    """Invalid harness configuration."""
