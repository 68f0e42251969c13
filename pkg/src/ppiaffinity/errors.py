"""Exception and warning types shared across the package."""


class PpiAffinityError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(PpiAffinityError):
    """A dataset or table file could not be parsed.

    Carries the offending path and, when known, the 1-based line number.
    """

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}"
            if line is not None:
                loc += f":{line}"
            loc += ": "
        super().__init__(f"{loc}{message}")
        self.path = path
        self.line = line


class DatasetValidationError(PpiAffinityError):
    """A record or dataset violated a structural invariant."""


class AlignmentError(PpiAffinityError):
    """Complex ids and embedding tables do not line up."""


class UndefinedCorrelationError(PpiAffinityError):
    """Correlation requested for a constant vector (zero variance).

    Raised instead of silently propagating NaN so that model selection
    never compares against an undefined score.
    """


class TrainingDivergedError(PpiAffinityError):
    """Training hit a non-finite loss; message names the epoch and batch."""


class DataWarning(UserWarning):
    """Non-fatal data quality issue (odd affinity range, unknown ids, ...)."""
