"""Exception types raised by the solvers and the scenario loader."""


class NanoPNPError(Exception):
    """Base class for all package errors."""


class NonPositiveInput(NanoPNPError, ValueError):
    """A length, concentration, diffusivity or constant is not strictly positive."""


class OutOfDomain(NanoPNPError, ValueError):
    """A normalized axial coordinate lies outside [0, 1]."""


class NonPositiveConcentration(NanoPNPError, ValueError):
    """A Boltzmann prefactor or concentration product became non-positive."""


class DomainError(NanoPNPError, ValueError):
    """A closed-form expression was called outside its parameter domain."""


class DomainWarning(RuntimeWarning):
    """A closed form was evaluated at a removable singularity."""


class NonPositiveG(NanoPNPError, ValueError):
    """The closure g2 = g1 + lambda**2 * beta produced a non-positive value."""


class DegenerateGeometry(NanoPNPError, ValueError):
    """The pore geometry cannot be resolved by the requested mesh."""


class GridMismatch(NanoPNPError, ValueError):
    """Two reports to be compared do not share a voltage grid."""


class ConfigError(NanoPNPError, ValueError):
    """A scenario file or run specification is malformed."""


class NoConvergence(NanoPNPError, RuntimeError):
    """An iterative solver stopped without meeting its tolerance.

    Parameters
    ----------
    message : str
        Human readable description.
    iterations : int
        Number of iterations performed.
    residual : float
        Last residual (solver specific norm).
    history : list of float, optional
        Residual history, when the solver keeps one.
    """

    def __init__(self, message, iterations=0, residual=float("nan"), history=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
        self.history = list(history) if history is not None else []
