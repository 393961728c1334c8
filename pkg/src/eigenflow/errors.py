"""Exception hierarchy shared by all eigenflow modules."""


class EigenflowError(Exception):
    """Base class for all package errors."""


class DomainError(EigenflowError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class ConfigError(EigenflowError, ValueError):
    """Invalid model or experiment configuration."""


class InputError(EigenflowError, ValueError):
    """Malformed numerical input (e.g. a non-Hermitian matrix)."""


class NumericError(EigenflowError, ArithmeticError):
    """A numerical routine failed (bracketing, quadrature, eigensolver)."""


class SolverError(NumericError):
    """An iterative solver did not converge.

    Attributes
    ----------
    residual : float
        Last residual reached before giving up.
    iterations : int
        Number of iterations performed.
    """

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


class StiffnessError(NumericError):
    """Adaptive time stepping could not make progress."""


class SingularKernelError(NumericError):
    """A singular interaction kernel was encountered (coincident eigenvalues)."""


class StepSizeError(NumericError):
    """A prescribed time step violates the stability bound."""
