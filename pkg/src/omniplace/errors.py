"""Exception hierarchy shared by every stage of the pipeline."""


class OmniplaceError(Exception):
    """Base class for all package errors."""


class ValidationError(OmniplaceError, ValueError):
    """Input failed a precondition check."""


class LayoutError(ValidationError):
    """A modality layout is malformed or an index falls outside it."""


class ShapeError(ValidationError):
    """Matrix dimensions are inconsistent with each other or with a layout."""


class ExtrapolationError(ValidationError):
    """A timestamp lies outside the span of a GPS track."""


class IngestionError(OmniplaceError):
    """Dataset files are missing, unpaired or unparsable."""


class SolverError(OmniplaceError):
    """The optimizer could not produce a solution."""


class SingularityError(SolverError):
    """The regularized normal equations are not positive definite."""


class DegenerateModelError(OmniplaceError):
    """A learned weight matrix carries no modality weight at all."""


class ModelFileError(OmniplaceError):
    """A persisted model is unreadable or incompatible with the data."""


class OutputError(OmniplaceError):
    """Results could not be written."""
