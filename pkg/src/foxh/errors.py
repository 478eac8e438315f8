"""Exception hierarchy. Every error carries a stable short code so the CLI
can echo it and map it onto an exit status."""


class FoxHError(Exception):
    code = "FOXH_ERROR"

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context


class ParseError(FoxHError):
    """Unreadable input: bad JSON, missing keys, malformed option text."""
    code = "PARSE"


class ValidationError(FoxHError):
    """Structurally readable input whose parameters violate a
    precondition."""
    code = "VALIDATION"


class PoleCollisionError(ValidationError):
    code = "POLE_COLLISION"


class InvalidDensityError(ValidationError):
    code = "INVALID_DENSITY"


class InvalidClassParamsError(ValidationError):
    code = "INVALID_CLASS_PARAMS"


class BadMatchingError(ValidationError):
    code = "BAD_MATCHING"


class BudgetError(ValidationError):
    code = "BUDGET"


class ShapeError(ValidationError):
    code = "SHAPE"


class UnknownFixtureError(ValidationError):
    code = "UNKNOWN_FIXTURE"


class DomainError(ValidationError):
    code = "DOMAIN"


class ThetaZeroError(ValidationError):
    code = "THETA_ZERO"


class SectorViolationError(ValidationError):
    code = "SECTOR_VIOLATION"


class GammaPoleError(ValidationError):
    code = "GAMMA_POLE"


class NumericalError(FoxHError):
    """Evaluation started but could not reach the requested tolerance."""
    code = "NUMERICAL"


class SeriesDomainError(NumericalError):
    code = "SERIES_DOMAIN"


class MultiplePolesError(NumericalError):
    code = "MULTIPLE_POLES"


class NoConvergenceError(NumericalError):
    code = "NO_CONVERGENCE"


class BadContourError(NumericalError):
    code = "BAD_CONTOUR"


class TruncationError(NumericalError):
    code = "TRUNCATION"


class DivergentError(NumericalError):
    code = "DIVERGENT"
