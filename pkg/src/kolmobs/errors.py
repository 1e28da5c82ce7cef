"""Exception taxonomy: validation failures vs numerical failures."""


class KolmobsError(Exception):
    """Base class for package errors."""


class ValidationError(KolmobsError):
    """Bad inputs: invalid profile, grid mismatch, malformed config."""


class NumericalError(KolmobsError):
    """A numerical procedure failed (non-convergence, singular solve)."""


class EigenSolveError(NumericalError):
    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual
