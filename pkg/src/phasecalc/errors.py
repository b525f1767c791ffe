"""Shared exception types.

Error categories map onto CLI exit codes:

* ConfigError / ParseError -> exit 2 (bad input: scenario file, expression,
  grid parameters)
* GuardError -> exit 3 (a numerical precondition would be violated: matrix
  too large, order too high, box too small)
* AssertionError from --assert checks -> exit 4
"""


class ConfigError(ValueError):
    """Invalid configuration: bad grid parameters, unknown scenario fields,
    symbols that do not evaluate to finite values on the lattice."""


class GuardError(RuntimeError):
    """A resource or stability guard tripped (dense matrix too large,
    truncation order out of range, phase-space box too small, ...)."""


class InsufficientRangeError(GuardError):
    """A decay-rate fit was requested on a box too small to hold the
    minimum number of dyadic shells."""


class ParseError(ValueError):
    """Symbol-expression or scenario parse failure, with position info."""

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        if line is not None:
            message = "line %d, col %d: %s" % (line, col, message)
        super().__init__(message)


class BoxDecayWarning(UserWarning):
    """A symbol or state does not decay to round-off at the box edge, so
    periodization error may exceed the advertised tolerances."""
