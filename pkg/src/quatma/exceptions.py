"""Exception hierarchy shared by all quatma modules."""


class QuatmaError(Exception):
    """Base class for every error raised by quatma."""


class NotHyperHermitian(QuatmaError, ValueError):
    pass


class PairingAmbiguous(QuatmaError, ArithmeticError):
    """Eigenvalues of the complex embedding failed to pair up."""


class NotSymmetric(QuatmaError, ValueError):
    pass


class GridTooCoarse(QuatmaError, ValueError):
    pass


class CalibrationInconsistent(QuatmaError, ArithmeticError):
    """Density ratio varied across test functions; a convention is broken."""


class JetNotPluriharmonic(QuatmaError, ValueError):
    pass


class PreconditionViolated(QuatmaError, ValueError):
    pass


class SublevelTouchesBoundary(PreconditionViolated):
    pass


class NotPsh(QuatmaError, ArithmeticError):
    """Id + Hess_H(phi) lost positive definiteness somewhere on the grid."""

    def __init__(self, message, worst_index=None, margin=None):
        super().__init__(message)
        self.worst_index = worst_index
        self.margin = margin


class MaxIterationsExceeded(QuatmaError, RuntimeError):
    pass


class LinearSolveStalled(QuatmaError, RuntimeError):
    pass


class UnknownSuite(QuatmaError, KeyError):
    def __str__(self):
        # KeyError would repr() the message
        return str(self.args[0]) if self.args else ""


class ConfigError(QuatmaError, ValueError):
    pass
