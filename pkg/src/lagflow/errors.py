"""Exception hierarchy.

Every error carries a stable ``code`` (its class name) so the CLI can emit
machine-readable error documents.
"""


class LagflowError(Exception):
    @property
    def code(self) -> str:
        return type(self).__name__


class BadParams(LagflowError, ValueError):
    pass


class WrongFamily(LagflowError, ValueError):
    pass


class DegenerateMetric(LagflowError, ArithmeticError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class NotLagrangian(LagflowError, ArithmeticError):
    pass


class NotConformal(LagflowError, ArithmeticError):
    pass


class NotHSL(LagflowError, ArithmeticError):
    pass


class NoExtremum(LagflowError, ArithmeticError):
    pass


class OutOfRange(LagflowError, ArithmeticError):
    pass


class StepTooLarge(LagflowError, ArithmeticError):
    pass


class Blowup(LagflowError, ArithmeticError):
    pass


class ScaleCollapse(LagflowError, ArithmeticError):
    pass


class BadResolution(LagflowError, ValueError):
    pass
