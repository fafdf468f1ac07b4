"""Exception types shared across the package."""


class OprootError(Exception):
    """Base class for all package-specific failures."""


class BranchCutViolation(OprootError):
    """Kernel evaluated on the branch cut of the square-root factor."""


class GeometryError(OprootError):
    """Requested contour geometry is degenerate or self-intersecting."""


class TailBoundFailure(OprootError):
    """Truncation point is too small for the analytic tail certificate."""


class NonFiniteIntegrand(OprootError):
    """Integrand returned NaN/inf at a quadrature node (pole on the path)."""


class QuadratureError(OprootError):
    """Adaptive panel subdivision hit the refinement cap without converging."""


class ProbeOnSpectrum(OprootError):
    """Probe point lies on the continuous spectral interval."""


class ProbeOnContour(OprootError):
    """Probe point is too close to the integration contour."""


class SpectrumTouchesContour(OprootError):
    """Spectrum of the operator argument is not separated from the contour."""


class NotAdmissible(OprootError):
    """Contour fails the strict solvability inequality v0 < d0^2/4."""


class MaxIterExceeded(OprootError):
    """Fixed-point iteration did not reach tolerance within max_iter."""


class NoAdmissibleContour(OprootError):
    """Contour-family search found no admissible member."""


class EigenvalueOnCircle(OprootError):
    """An eigenvalue lies on (or numerically too close to) the circle."""


class GapConditionViolated(OprootError):
    """Eigenvalue gaps too small for the requested cluster radius."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class SingularTransferOnGamma(OprootError):
    """Transfer function numerically singular at a circle node."""


class ConfigError(OprootError):
    """Run configuration file is missing, malformed, or inconsistent."""
