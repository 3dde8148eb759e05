"""Exception hierarchy shared by all privtest modules.

The command-line front end maps these onto process exit codes, so raise
the most specific class available.
"""


class PrivtestError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(PrivtestError):
    """Malformed or inconsistent input (bad file, bad parameter, bad shape)."""


class AlphabetError(ValidationError):
    """Two objects that must share a label set / alphabet do not."""


class SupportError(PrivtestError):
    """A zero probability mass appears where an operation requires support."""


class NumericalError(PrivtestError):
    """A numerical invariant was violated beyond rounding tolerance."""


class FeasibilityError(PrivtestError):
    """A policy constraint set is empty for some input pair."""


class SizeCapError(PrivtestError):
    """A computation was refused because it exceeds a configured size cap."""


class EnumerationCapError(SizeCapError):
    """Exhaustive enumeration would exceed the sequence-count cap."""


class CrossCheckError(PrivtestError):
    """Independent computations of the same quantity disagree."""
