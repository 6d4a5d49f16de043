"""Exception hierarchy shared by all wavebound modules."""

from __future__ import annotations


class WaveboundError(Exception):
    """Base class for every error raised by the package."""


class SchemaError(WaveboundError, ValueError):
    """Input document does not match the expected JSON layout."""


# -- numeric failures (CLI exit code 5) ---------------------------------------

class NumericFailure(WaveboundError):
    pass


class NonIntegrable(NumericFailure):
    """An endpoint zero of the radicand has multiplicity >= 2."""


class DomainViolation(NumericFailure):
    """The radicand s^2 - 2*Omega is negative inside the integration range."""


class Unbounded(NumericFailure):
    """The head function showed no interior minimum on the searched range."""


# -- stream solutions ---------------------------------------------------------

class BelowCutoff(WaveboundError, ValueError):
    """Requested s lies below the cutoff s0."""


class OutOfRange(WaveboundError, ValueError):
    """Requested y lies outside the maximal interval of monotonicity."""


class NoStream(WaveboundError, ValueError):
    """No stream solution exists for the requested head (r < r_c)."""


class PlusBranchAbsent(WaveboundError):
    """r exceeds r0, so only the minus branch exists.

    The minus branch that was found is attached as ``minus``.
    """

    def __init__(self, message: str, minus=None):
        super().__init__(message)
        self.minus = minus


# -- wave bounds --------------------------------------------------------------

class NoCheckS(WaveboundError):
    """No comparison parameter s with h(s) equal to the surface extremum."""


class HypothesisViolated(WaveboundError):
    pass


class MissingBoundarySamples(WaveboundError, ValueError):
    pass


# -- gridded fields -----------------------------------------------------------

class EvaluationDomain(WaveboundError, ValueError):
    """A power-law nonlinearity was asked for a value at negative u."""


class GridMismatch(WaveboundError, ValueError):
    pass


class GradientTooSmall(WaveboundError):
    def __init__(self, message: str, node=None):
        super().__init__(message)
        self.node = node


class OutOfPatch(WaveboundError, ValueError):
    pass


class DegenerateHp(WaveboundError):
    pass
