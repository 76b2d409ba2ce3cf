"""Exception hierarchy shared by the whole package.

Three branches map onto the CLI exit-code contract: configuration problems
(exit 2), data problems (exit 3), and numeric/fit problems (exit 4).
"""


class PhenoruleError(Exception):
    """Base class for all package errors."""


class ConfigError(PhenoruleError):
    """Invalid configuration or unusable flag values (CLI exit 2)."""


class DataError(PhenoruleError):
    """Malformed, inconsistent, or insufficient input data (CLI exit 3)."""


class FitError(PhenoruleError):
    """Numeric failure while fitting a model (CLI exit 4)."""


# -- configuration ----------------------------------------------------------

class BadConfig(ConfigError):
    pass


class BadRate(ConfigError):
    """A rate argument fell outside its valid range."""


# -- data -------------------------------------------------------------------

class MissingColumn(DataError):
    pass


class BadCategory(DataError):
    pass


class DuplicatePatient(DataError):
    pass


class MalformedLine(DataError):
    pass


class MissingField(DataError):
    pass


class EmptyCohort(DataError):
    pass


class RowMismatch(DataError):
    pass


class ColumnMismatch(DataError):
    pass


class OneClassOnly(DataError):
    pass


class PatientMismatch(DataError):
    pass


class TooFewPatients(DataError):
    pass


class EmptyGroup(DataError):
    pass


# -- fitting ----------------------------------------------------------------

class EmptyVocabulary(FitError):
    pass


class NonFinite(FitError):
    pass


class DegenerateLabels(FitError):
    pass


class DidNotConverge(FitError):
    pass


class SeparationDetected(FitError):
    pass


class RankDeficient(FitError):
    pass
