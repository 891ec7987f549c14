"""Typed failures raised by the toolkit.

Every error carries enough context to be reported in a JSON record; the CLI
maps them onto exit codes (see ``wedgeshock.cli``).
"""


class WedgeShockError(Exception):
    """Base class for all toolkit errors."""

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context

    def to_record(self):
        rec = {"error": type(self).__name__, "message": str(self)}
        rec.update({k: _plain(v) for k, v in self.context.items()})
        return rec


def _plain(v):
    try:
        import numpy as np
        if isinstance(v, np.ndarray):
            return v.tolist()
        if isinstance(v, np.generic):
            return v.item()
    except ImportError:  # pragma: no cover
        pass
    return v


class ConfigError(WedgeShockError):
    pass


# physics / domain
class CavitationError(WedgeShockError):
    """Bernoulli bracket is non-positive: the state would be vacuum."""


class DivisionDomainError(WedgeShockError):
    pass


class DomainError(WedgeShockError):
    pass


class NoAdmissibleRoot(WedgeShockError):
    pass


class NoIntersection(WedgeShockError):
    pass


class FrameError(WedgeShockError):
    pass


# solvers
class ContinuationBreakdown(WedgeShockError):
    pass


class MeshQualityError(WedgeShockError):
    pass


class EllipticityLoss(WedgeShockError):
    pass


class LinearSolveFailure(WedgeShockError):
    pass


class TrustRegionExit(WedgeShockError):
    pass


class OscillationDetected(WedgeShockError):
    pass


# barriers
class ParameterInfeasible(WedgeShockError):
    pass


class SearchFailure(WedgeShockError):
    pass
