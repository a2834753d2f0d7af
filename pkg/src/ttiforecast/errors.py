"""Exception types raised across the package.

Every error derives from :class:`TtiError` and from the builtin exception that
best describes it, so callers can catch either.
"""


class TtiError(Exception):
    """Base class for all package errors."""


# ingest

class MalformedRow(TtiError, ValueError):
    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class NonHourAligned(TtiError, ValueError):
    pass


class TtiBelowOne(TtiError, ValueError):
    pass


class DuplicateTimestamp(TtiError, ValueError):
    pass


class MissingColumn(TtiError, KeyError):
    def __init__(self, column):
        self.column = column
        super().__init__(column)

    def __str__(self):
        return f"missing column: {self.column}"


class DuplicateDate(TtiError, ValueError):
    pass


class EmptyIntersection(TtiError, ValueError):
    pass


class InvalidRange(TtiError, ValueError):
    pass


# describe

class EmptyInput(TtiError, ValueError):
    pass


class IoFailure(TtiError, OSError):
    pass


# features

class MissingLag(TtiError, KeyError):
    def __init__(self, timestamp):
        self.timestamp = timestamp
        super().__init__(timestamp)

    def __str__(self):
        return f"no TTI value at lag timestamp {self.timestamp.isoformat()}"


class TooFewRows(TtiError, ValueError):
    pass


class DegreeOutOfRange(TtiError, ValueError):
    pass


class ExpansionTooLarge(TtiError, ValueError):
    def __init__(self, width, cap):
        self.width = width
        self.cap = cap
        super().__init__(f"expanded width {width} exceeds cap {cap}")


# regress

class RankDeficient(TtiError, ArithmeticError):
    pass


class NotConverged(TtiError, ArithmeticError):
    def __init__(self, iterations, violation):
        self.iterations = iterations
        self.violation = violation
        super().__init__(
            f"not converged after {iterations} iterations (max violation {violation:.3g})")


class WidthMismatch(TtiError, ValueError):
    pass


class InvalidSpec(TtiError, ValueError):
    pass


# select

class TargetTooLarge(TtiError, ValueError):
    pass


class TargetZero(TtiError, ValueError):
    pass


# evaluate

class ConstantTarget(TtiError, ZeroDivisionError):
    pass


class LengthMismatch(TtiError, ValueError):
    pass


class InvalidK(TtiError, ValueError):
    pass


class SampleTooLarge(TtiError, ValueError):
    pass


class FoldError(TtiError):
    """A fit failure inside cross-validation, tagged with the fold index."""

    def __init__(self, fold, cause):
        self.fold = fold
        self.cause = cause
        super().__init__(f"fold {fold}: {cause}")


# experiment

class MissingFamily(TtiError, ValueError):
    pass
