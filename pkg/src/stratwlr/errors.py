"""Exception types raised across the package."""


class StratWLRError(Exception):
    """Base class for all package errors."""


class ValidationError(StratWLRError, ValueError):
    """Bad user input: malformed records, out-of-range parameters, bad files."""


class DegenerateError(StratWLRError, ArithmeticError):
    """A statistic is undefined for the data at hand (e.g. zero variance)."""


class ConsistencyError(StratWLRError, RuntimeError):
    """Internal inputs disagree with each other (misaligned weights, foreign times)."""
