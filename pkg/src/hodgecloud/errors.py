"""Exception hierarchy for hodgecloud.

Every degenerate input has a designated error; estimators never fall back
silently to a wrong answer.
"""


class HodgeCloudError(Exception):
    """Base class for all hodgecloud errors."""


class ConfigError(HodgeCloudError):
    """Invalid configuration (schema violation, inconsistent parameters)."""


class DegenerateSpectrumError(HodgeCloudError):
    """Local covariance eigengap too small to certify a tangent space.

    Carries the offending sample index when raised from a field computation.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class IsolatedPointError(HodgeCloudError):
    """All cutoff weights vanish at a base point (no neighbors within delta)."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class BandwidthTooLargeError(HodgeCloudError):
    """Local shift operator failed to be positive definite."""


class GaugeFailureError(HodgeCloudError):
    """Period matrix missing, non-square, or numerically singular."""


class DisconnectedCloudError(HodgeCloudError):
    """Neighbor graph is disconnected; global orientation undefined."""


class EigensolverError(HodgeCloudError):
    """Iterative eigensolver failed to converge within the iteration budget."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class ScalingWarning(UserWarning):
    """Bandwidth/sample-size pair violates the concentration scaling guard."""
