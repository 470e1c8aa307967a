"""Exception hierarchy.

``InvalidInputError`` covers bad arguments and configs. Everything derived from
``NumericalDiagnostic`` signals that a computation ran but could not certify
its own result (window too short, tail not decayed, budget exceeded, ...).
"""


class InvalidInputError(ValueError):
    pass


class NumericalDiagnostic(RuntimeError):
    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class ExtrapolationError(NumericalDiagnostic):
    pass


class FitWindowError(NumericalDiagnostic):
    pass


class TruncationError(NumericalDiagnostic):
    pass


class ConvergenceError(NumericalDiagnostic):
    pass


class BudgetError(NumericalDiagnostic):
    pass


class ResolutionError(NumericalDiagnostic):
    pass
