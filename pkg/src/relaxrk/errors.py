"""Exception hierarchy shared by the solver modules."""


class RelaxRKError(Exception):
    """Base class for all package errors."""


class TableauError(RelaxRKError, ValueError):
    """A coefficient table violates a structural requirement."""


class UnsupportedError(RelaxRKError, ValueError):
    """The requested order, reduction or feature is outside the supported range."""


class NumericalError(RelaxRKError, ArithmeticError):
    """Non-finite values, failed nonlinear solves or CFL violations."""


class StepFailure(NumericalError):
    """An implicit stage solve failed inside an IMEX step.

    Carries the stage and node index of the failing solve so the caller can
    report where the integration broke down.
    """

    def __init__(self, message, stage=None, node=None, time=None):
        super().__init__(message)
        self.stage = stage
        self.node = node
        self.time = time

    def __str__(self):
        parts = [super().__str__()]
        if self.stage is not None:
            parts.append(f"stage={self.stage}")
        if self.node is not None:
            parts.append(f"node={self.node}")
        if self.time is not None:
            parts.append(f"t={self.time:.17g}")
        return " ".join(parts)
