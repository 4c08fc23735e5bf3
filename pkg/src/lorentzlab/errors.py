"""Exception hierarchy shared by all lorentzlab modules."""


class LorentzLabError(Exception):
    """Base class for every error raised by this package."""


class ExpressionError(LorentzLabError):
    """Raised on unparsable expression or config text.

    Carries the 1-based ``line`` and ``col`` of the offending token so
    front-ends can print precise diagnostics.
    """

    def __init__(self, message, line=1, col=1):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class SignatureError(LorentzLabError):
    """A symmetric form does not have the required signature."""


class DomainError(LorentzLabError):
    """A point left, or was requested outside, a non-periodic domain."""


class PeriodicityError(LorentzLabError):
    """Components flagged periodic disagree at identified boundary points."""


class GeodesicIncompleteError(LorentzLabError):
    """A geodesic blew up or escaped before the requested parameter.

    The escape parameter is reported in ``escape_time``.
    """

    def __init__(self, message, escape_time):
        super().__init__(f"{message} (escape at t={escape_time:.6g})")
        self.escape_time = escape_time


class ClosureError(LorentzLabError):
    """An operation requiring a closed leaf received an open trace."""


class TracingError(LorentzLabError):
    """Direction-field tracing lost continuity of the tracked family."""


class ReductionError(LorentzLabError):
    """Form reduction failed (perturbation too large for the real branch)."""


class BoundedSequenceError(LorentzLabError):
    """A matrix sequence required to blow up stayed bounded."""


class EquicontinuityError(BoundedSequenceError):
    """Differential growth below the threshold that the estimator needs."""


class PreconditionError(LorentzLabError):
    """Generic operation precondition failure."""
