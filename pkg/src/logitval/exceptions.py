"""Exception hierarchy shared by all modules."""


class LogitValError(Exception):
    """Base class for errors raised by logitval."""


class DataError(LogitValError):
    """Input data cannot be used as given."""


class ComputeError(LogitValError):
    """A numerical procedure could not produce a result."""


class CollinearDesign(DataError):
    """The design matrix (including the intercept) is rank deficient."""

    def __init__(self, columns=()):
        self.columns = tuple(columns)
        detail = ", ".join(self.columns) if self.columns else "unknown columns"
        super().__init__(f"design matrix is rank deficient; linearly dependent: {detail}")


class SingleClassOutcome(DataError):
    """All outcomes are equal, so a logistic model cannot be fitted."""


class DimensionMismatch(DataError):
    pass


class MissingColumn(DataError):
    pass


class NonBinaryOutcome(DataError):
    pass


class NonNumericCovariate(DataError):
    pass


class DegenerateOutcome(ComputeError):
    """A metric that needs events and non-events received only one class."""


class SingularInformation(ComputeError):
    pass


class SingularPenalizedHessian(ComputeError):
    pass


class AllSubsetsDiscarded(ComputeError):
    """Every resampling subset was discarded, so no estimate exists."""


class BrierNotSupported(LogitValError, ValueError):
    """Leave-pair-out cross-validation is not defined for the Brier score."""


class InsufficientReplicates(ComputeError):
    pass
