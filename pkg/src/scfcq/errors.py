"""Exception hierarchy shared across the estimator modules."""


class ScfcqError(Exception):
    """Base class for all package errors."""


class DegenerateDesign(ScfcqError):
    """Weighted design has rank below the number of columns."""


class NoConvergence(ScfcqError):
    """Interior point iterations exhausted before the gap closed."""

    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit


class OutOfSupport(ScfcqError):
    """Basis argument falls outside the basis support."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class QuantileCrossing(ScfcqError):
    """Upper first-stage quantile fit lies at or below the lower one."""

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(int(i) for i in indices)


class BandwidthTooSmall(ScfcqError):
    pass


class NoPositiveFits(ScfcqError):
    pass


class InsufficientSubsample(ScfcqError):
    pass


class PathAborted(ScfcqError):
    """Sequential recursion stopped at grid index ``index``.

    ``partial`` holds the path estimated down to ``index - 1`` (or ``None``
    when the initial fit itself failed).
    """

    def __init__(self, index, cause, partial=None):
        super().__init__(f"path aborted at grid index {index}: {cause}")
        self.index = index
        self.cause = cause
        self.partial = partial


class TooManyFailures(ScfcqError):
    pass


class NoBracket(ScfcqError):
    pass


class ConfigError(ScfcqError):
    """Invalid run configuration; ``field`` is a dotted path."""

    def __init__(self, field, reason):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


class DrawFailed(ScfcqError):
    """Bootstrap draw ``draw`` aborted at grid index ``index``."""

    def __init__(self, draw, index):
        super().__init__(f"bootstrap draw {draw} aborted at grid index {index}")
        self.draw = draw
        self.index = index
