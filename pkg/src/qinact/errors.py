"""Exception types raised across the package.

Everything derives from :class:`QinactError` so callers (and the CLI) can
catch library failures in one place while letting genuine bugs surface as
plain Python exceptions.
"""


class QinactError(Exception):
    """Base class for all errors raised by this package."""


# --- dataset ingestion ------------------------------------------------------

class MissingColumn(QinactError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"column {name!r} not found in CSV header")


class ParseError(QinactError):
    """A cell failed to parse. Row numbers are 1-based over data rows."""

    def __init__(self, row, col, token):
        self.row = row
        self.col = col
        self.token = token
        super().__init__(f"row {row}, column {col!r}: cannot use value {token!r}")


class EmptyDataset(QinactError):
    def __init__(self, message="dataset contains no records"):
        super().__init__(message)


class DimensionMismatch(QinactError):
    def __init__(self, message):
        super().__init__(message)


# --- Kaplan-Meier -----------------------------------------------------------

class NonPositiveWeight(QinactError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"multiplier at index {index} is not strictly positive")


class LengthMismatch(QinactError):
    def __init__(self, expected, got):
        self.expected = expected
        self.got = got
        super().__init__(f"expected vector of length {expected}, got {got}")


# --- quantile-regression solver ---------------------------------------------

class RankDeficient(QinactError):
    def __init__(self, message="design matrix is rank deficient on positive-weight rows"):
        super().__init__(message)


class Unbounded(QinactError):
    """Internal error: a full-rank weighted check loss cannot be unbounded."""

    def __init__(self):
        super().__init__("objective is unbounded below; this indicates an internal error")


class IterationLimit(QinactError):
    def __init__(self, limit):
        self.limit = limit
        super().__init__(f"solver did not converge within {limit} pivots")


# --- model fitting ----------------------------------------------------------

class InsufficientEvents(QinactError):
    def __init__(self, count, required):
        self.count = count
        self.required = required
        super().__init__(
            f"only {count} events observed before t0; at least {required} required"
        )


class ZeroCensoringSurvival(QinactError):
    def __init__(self, index, time):
        self.index = index
        self.time = time
        super().__init__(
            f"censoring survival estimate is zero at event time {time} (record {index}); "
            "set truncation_bound to a value slightly below the largest observed time "
            "so the censoring distribution keeps mass at the tail"
        )


# --- inference --------------------------------------------------------------

class TooManyRedraws(QinactError):
    def __init__(self, redraws, budget):
        self.redraws = redraws
        self.budget = budget
        super().__init__(
            f"{redraws} perturbation replicates required redraws (budget {budget}); "
            "the dataset is too fragile for multiplier resampling"
        )


class DegenerateEnsemble(QinactError):
    def __init__(self, coordinate):
        self.coordinate = coordinate
        super().__init__(
            f"perturbation replicates have zero variance in coordinate {coordinate}"
        )


class NegativeVariance(QinactError):
    def __init__(self, coordinate, value):
        self.coordinate = coordinate
        self.value = value
        super().__init__(
            f"variance of coordinate {coordinate} is {value}; must be strictly positive"
        )


class SingularGamma(QinactError):
    def __init__(self, cond):
        self.cond = cond
        super().__init__(
            f"score covariance matrix is numerically singular (condition number {cond:.3e})"
        )


# --- simulation -------------------------------------------------------------

class InvalidRegime(QinactError):
    def __init__(self, message):
        super().__init__(message)


class NoSolution(QinactError):
    def __init__(self, message):
        super().__init__(message)


class CellFailure(QinactError):
    def __init__(self, cell, n_errors, n_sims):
        self.cell = cell
        self.n_errors = n_errors
        self.n_sims = n_sims
        super().__init__(
            f"simulation cell {cell} failed: {n_errors} of {n_sims} replicates errored"
        )
