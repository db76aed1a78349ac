"""Exception and warning types shared across the package."""


class GraphValidationError(ValueError):
    """Input data does not form a valid graph-Laplacian."""


class AssumptionError(RuntimeError):
    """A structural assumption of the reduction failed on this input."""


class NullspaceCaptureError(AssumptionError):
    """The reduced model did not capture the expected zero-eigenvalue block.

    Usually means the first-stage Krylov subspace is too small (increase k1)
    or the nullspace detection tolerance is off for this graph.
    """


class ScalingError(AssumptionError):
    """The row-sum scaling vector has a (numerically) zero entry.

    Carries the offending index so callers can report which reduced vertex
    blocks the transformation to Laplacian form.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NullspaceMismatchWarning(UserWarning):
    """Detected zero-eigenvalue multiplicity disagrees with the component count."""
