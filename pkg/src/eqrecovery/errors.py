class EqRecoveryError(Exception):
    pass


class LanguageError(EqRecoveryError, ValueError):
    """Malformed or empty delay language."""


class ModelError(EqRecoveryError, ValueError):
    """Inconsistent system model data."""


class PatternOutsideLanguage(EqRecoveryError):
    """Observed arrival pattern is not generated by any word of the language."""


class DuplicateArrival(EqRecoveryError):
    pass


class StepBeyondHorizon(EqRecoveryError):
    pass


class ConflictingZeroPattern(EqRecoveryError):
    """Sequences sharing a prefix node disagree on data availability."""


class AllInfeasible(EqRecoveryError):
    def __init__(self, message, table=None):
        super().__init__(message)
        self.table = table or []


class CertificateError(EqRecoveryError):
    """Certificate does not match the model/language or fails verification."""
