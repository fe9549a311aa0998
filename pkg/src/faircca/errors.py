"""Exception hierarchy for faircca."""


class FairCcaError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(FairCcaError, ValueError):
    """Invalid configuration or arguments (CLI exit code 2)."""


class NumericalError(FairCcaError, ArithmeticError):
    """Numerical failure during a fit (CLI exit code 1)."""


class ShapeMismatch(ConfigError):
    pass


class NonFiniteInput(ConfigError):
    pass


class EmptyGroup(ConfigError):
    pass


class GroupMismatch(ConfigError):
    pass


class SamePair(ConfigError):
    pass


class ParseError(ConfigError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class FactorizationFailure(NumericalError):
    pass


class RankDeficientStep(NumericalError):
    pass


class RankTooSmall(NumericalError):
    pass


class DegenerateDirection(NumericalError):
    pass


class SubproblemNotConverged(NumericalError):
    pass


class FeasibilityError(NumericalError):
    pass


class JointNotPSD(NumericalError):
    pass
