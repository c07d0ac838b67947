"""Exception hierarchy.

Input problems derive from :class:`ValidationError` (CLI exit code 2);
failures of a statistic on otherwise valid input derive from
:class:`AnalysisError` (CLI exit code 3).
"""


class XeqError(Exception):
    """Base class for every error raised by xeqkit."""


class ValidationError(XeqError, ValueError):
    """Input does not satisfy a documented precondition."""


class AnalysisError(XeqError, ArithmeticError):
    """A statistic is undefined or a fit failed on the given data."""


# -- scale / ingestion -------------------------------------------------------


class UnknownLabel(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class UnknownItem(ValidationError):
    pass


class EmptyDataset(ValidationError):
    pass


class ParseError(ValidationError):
    pass


class MissingColumn(ValidationError):
    pass


class MissingValue(ValidationError):
    pass


class DuplicateRespondent(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


# -- content validity --------------------------------------------------------


class EmptyPanel(ValidationError):
    pass


class EmptyScale(ValidationError):
    pass


# -- reliability -------------------------------------------------------------


class ConstantInput(AnalysisError):
    pass


class LengthMismatch(ValidationError):
    pass


class ZeroTotalVariance(AnalysisError):
    pass


class TooFewItems(ValidationError):
    pass


class DegenerateData(AnalysisError):
    pass


# -- construct validity ------------------------------------------------------


class ConstantColumn(AnalysisError):
    pass


class NonSymmetric(ValidationError):
    pass


class NonFiniteEntry(ValidationError):
    pass


class NotPositiveDefinite(AnalysisError):
    pass


class UnidentifiedModel(ValidationError):
    pass


class NonConvergence(AnalysisError):
    """Raised by strict CFA fits; ``result`` holds the best iterate."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


# -- discriminant validity ---------------------------------------------------


class ClassTooSmall(ValidationError):
    pass


class SingularCovariance(AnalysisError):
    pass


class DegenerateGroup(AnalysisError):
    pass


class TrialError(AnalysisError):
    """Wraps a failure inside one discriminant trial."""

    def __init__(self, trial, cause):
        super().__init__(f"trial {trial}: {cause}")
        self.trial = trial
        self.cause = cause


# -- scoring / benchmark -----------------------------------------------------


class EmptyDimension(ValidationError):
    pass


class BadWeights(ValidationError):
    pass


class EmptyBenchmark(ValidationError):
    pass


class DuplicateSystem(ValidationError):
    pass


class VersionMismatch(ValidationError):
    pass


# -- simulation / reporting --------------------------------------------------


class BadSpec(ValidationError):
    pass


class MissingSection(ValidationError):
    pass


class WriteError(XeqError, OSError):
    pass
