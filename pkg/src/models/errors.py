"""
Exception hierarchy for the cascade popularity pipeline.

Every error carries the process exit code the CLI reports for it.
"""
from pathlib import Path
from typing import Optional, Union


class CascadePopError(Exception):
    """Base class for all pipeline errors"""
    exit_code = 1


class ConfigError(CascadePopError):
    """Invalid or inconsistent configuration"""
    exit_code = 2


class ConfigMismatchError(ConfigError):
    """An input was produced under a different feature configuration"""

    def __init__(self, what: str, expected: str, found: Optional[str]):
        self.expected = expected
        self.found = found
        super().__init__(f"{what} was produced with config fingerprint {found or 'unknown'}, expected {expected}")


class DataError(CascadePopError):
    """Input data that cannot be used"""
    exit_code = 3


class ParseError(DataError):
    """A line of an input file failed to parse"""

    def __init__(self, path: Union[str, Path], line_number: int, reason: str):
        self.path = str(path)
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"{self.path}:{line_number}: {reason}")


class GraphParseError(ParseError):
    pass


class CascadeParseError(ParseError):
    pass


class EmptyGraphError(DataError):
    pass


class NoCascadesError(DataError):
    pass


class NonContiguousCascadeError(DataError):
    """A streamed cascade file revisits a tweet after moving on"""


class DomainError(DataError):
    """An argument outside the domain of an operation"""


class SplitError(DataError):
    pass


class EmptyTestSetError(DataError):
    pass


class NumericalError(CascadePopError):
    exit_code = 4


class SingularFitError(NumericalError):
    """The normal matrix of a fit is rank deficient"""

    def __init__(self, variant: str, column: str):
        self.variant = variant
        self.column = column
        super().__init__(f"singular fit for {variant}: column '{column}' is linearly dependent on the others")


class UnstableFitError(NumericalError):
    """Fitted residuals are not orthogonal to the predictors"""

    def __init__(self, variant: str, gradient: float, bound: float):
        self.variant = variant
        self.gradient = gradient
        super().__init__(f"unstable fit for {variant}: residual gradient {gradient:.3g} exceeds {bound:.3g}")


class UndefinedDensityError(NumericalError):
    """Link density needs at least two adopters"""


class UndefinedCorrelationError(NumericalError):
    pass
