"""
Laboratory errors.

Every failure carries a human-readable ``detail`` and the process
``exit_status`` the CLI maps it to (2 for configuration problems, 1 for
solver failures and violated hypotheses).
"""
from typing import Optional


class LabError(Exception):
    """Base class for all anisolab failures."""

    exit_status: int = 1

    def __init__(self, detail: str, exit_status: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_status is not None:
            self.exit_status = exit_status


class ConfigError(LabError):
    """Experiment configuration failed validation."""

    exit_status = 2


class DegenerateAtZero(LabError):
    """A quantity is undefined at the zero vector."""


class DegenerateGeometry(LabError):
    """Polygon or mesh input is not usable (self-intersecting, zero area, ...)."""


class WeightTooSingular(LabError):
    """Radial weight |x|^{-c} is not integrable in two dimensions."""


class WrongRegime(LabError):
    """Operation requested outside the parameter regime it is valid for."""


class InvalidRadius(LabError):
    """Geodesic radius outside the admissible range for the curvature."""


class HypothesisViolated(LabError):
    """A theorem hypothesis does not hold for the given input."""


class NoConvergence(LabError):
    """Iteration cap reached; the best iterate is attached as ``report``."""

    def __init__(self, detail: str, report=None):
        super().__init__(detail)
        self.report = report


class NonCoerciveSource(LabError):
    """Energy diverged to -inf along the iterates; last iterate attached."""

    def __init__(self, detail: str, report=None):
        super().__init__(detail)
        self.report = report
