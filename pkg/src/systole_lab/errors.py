"""Exception hierarchy. Every error carries a short machine-readable code."""


class SystoleLabError(Exception):
    code = "error"

    def __init__(self, message="", code=None):
        if code is not None:
            self.code = code
        super().__init__(message or self.code)


class ChartError(SystoleLabError):
    """Chart-coordinate operation hit the point at infinity."""

    code = "unbounded-chart"


class DegenerateCircleError(SystoleLabError):
    code = "degenerate-circle"


class NonIntegrableError(SystoleLabError):
    """Quadrature of f^2 against the round area element diverged."""

    code = "non-integrable"


class SingularHitError(SystoleLabError):
    """A curve sample coincides with an inverse-sqrt singular point."""

    code = "singular-hit"


class NotIsometryError(SystoleLabError):
    code = "not-isometry"


class NotAntipodalError(SystoleLabError):
    code = "not-antipodal"


class SingularPointError(SystoleLabError):
    code = "singular-point"


class SurfaceError(SystoleLabError):
    """Polynomial rejected; ``code`` names the violated condition."""


class ContinuationError(SystoleLabError):
    code = "too-close-to-root"


class LoopError(SystoleLabError):
    code = "point-on-loop"


class NonTransverseError(SystoleLabError):
    code = "non-transverse-intersection"


class SurgeryError(SystoleLabError):
    code = "surgery-failed"


class GeodesicError(SystoleLabError):
    code = "through-poles"


class ConfigError(SystoleLabError):
    code = "config-invalid"
