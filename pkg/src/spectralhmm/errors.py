"""Exception types raised across the package."""


class HmmError(Exception):
    """Base class for all package errors.

    ``stage`` names the pipeline step that failed when the error is raised
    from inside a composite routine (e.g. ``"recover_O"``).
    """

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage

    def __str__(self):
        msg = super().__str__()
        if self.stage:
            return f"[{self.stage}] {msg}"
        return msg


class ModelStructureError(HmmError, ValueError):
    """Matrix shapes are inconsistent with each other."""


class ModelValidationError(HmmError, ValueError):
    """A model violates a stochasticity constraint."""

    def __init__(self, message, report=None, stage=None):
        super().__init__(message, stage=stage)
        self.report = report


class NonUniqueStationaryError(HmmError):
    """The eigenvalue 1 of the transition matrix is not simple."""


class NumericalFailureError(HmmError):
    """A numerical routine produced an unusable result."""


class GenerationFailureError(HmmError):
    """Random model generation failed after all retries."""


class InsufficientDataError(HmmError, ValueError):
    """Too few observations for the requested estimator."""


class DegenerateEigenvalueError(HmmError):
    """Eigenvalues of the randomized moment combination kept colliding."""


class ConditioningError(HmmError):
    """The diagonalizing eigenvector matrix is numerically singular."""


class NearSingularPiError(HmmError):
    """An entry of the recovered initial distribution is too close to zero."""


class LikelihoodUnderflowError(HmmError):
    """The observation sequence has zero probability under the model."""

    def __init__(self, message, step=None, stage=None):
        super().__init__(message, stage=stage)
        self.step = step


class AlignmentError(HmmError, ValueError):
    """Permutation alignment cannot be performed."""
