"""Exception and warning types shared across the package.

Two broad classes matter for the CLI exit-code contract: subclasses of
InvalidParameter are caller mistakes (bad flags, violated preconditions,
exit code 2); the remaining HeatspecError subclasses are runtime/numerical
failures (exit code 1).
"""


class HeatspecError(Exception):
    """Base class for all package-specific errors."""


class InvalidParameter(HeatspecError, ValueError):
    """A caller-supplied parameter violates a documented precondition."""


class PolyParseError(InvalidParameter):
    """Malformed polynomial text."""


class DegreeCapExceeded(InvalidParameter):
    """Requested trace degree exceeds the configured maximum."""


class PreconditionViolated(InvalidParameter):
    """An explicit operation precondition failed (e.g. N too small for delta)."""


class PoleAtOne(InvalidParameter):
    """The closed-form transform was evaluated at its pole z = 1."""


class RegimeViolation(InvalidParameter):
    """Parameters are outside the validity regime of the selected bound."""


class InvalidConfig(InvalidParameter):
    """An experiment configuration is structurally invalid."""


class SingularMatrix(HeatspecError):
    """A matrix inverse was required but the matrix is numerically singular."""


class NonInvertibleSeries(HeatspecError):
    """Series reversion impossible: linear coefficient below working precision."""


class NoConvergence(HeatspecError):
    """Newton/continuation failed to converge after the retry ladder."""


class IllConditioned(HeatspecError):
    """A sampled matrix exceeded the condition-number cap after all retries."""


class EigFailure(HeatspecError):
    """The eigenvalue solver did not converge."""


class ZeroSpectrumValue(HeatspecError):
    """A negative power of a spectral value hit zero."""


class PrecisionWarning(UserWarning):
    """Result computed outside the numerically safe parameter range."""


class ConditioningWarning(UserWarning):
    """Operator exponential norm may be large; results may lose digits."""
