"""Exception hierarchy shared by all modules."""


class AdmissibleFlowError(Exception):
    """Base class for every error raised by this package."""


class MalformedInputError(AdmissibleFlowError, ValueError):
    pass


class NotKahlerError(AdmissibleFlowError, ValueError):
    """Admissible data violates 0 < |x_a| < 1."""


class InvariantViolation(AdmissibleFlowError, ArithmeticError):
    """An identity that must hold exactly did not: indicates a bug, never bad input."""


class HypothesisNotMet(AdmissibleFlowError):
    """P does not have exactly one root in (-1, 1)."""


class NumericFailure(AdmissibleFlowError, ArithmeticError):
    pass


class NoGQEProfile(AdmissibleFlowError):
    pass


class NotApplicable(AdmissibleFlowError):
    pass


class InvalidProfile(AdmissibleFlowError, ValueError):
    pass


class InvalidInitialization(AdmissibleFlowError, ValueError):
    pass


class PositivityLoss(AdmissibleFlowError):
    """Theta became non-positive at an interior node during the flow."""

    def __init__(self, message, node=None, time=None):
        super().__init__(message)
        self.node = node
        self.time = time


class ConfigError(AdmissibleFlowError, ValueError):
    """Schema violation in a run configuration; ``path`` locates the field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
