from __future__ import annotations


class PlapFreqError(Exception):
    """Base class for every error raised by plap_freq."""


class DomainError(PlapFreqError, ValueError):
    """Invalid parameter, degenerate domain or evaluation at a singularity."""


class MeshError(PlapFreqError, ValueError):
    pass


class OutsideMeshError(PlapFreqError, ValueError):
    def __init__(self, point: tuple[float, ...]):
        self.point = tuple(float(c) for c in point)
        super().__init__(f"Point {self.point} lies outside the meshed region")


class SolverError(PlapFreqError, RuntimeError):
    pass


class FrequencyUndefinedError(PlapFreqError, ValueError):
    """Raised where a defined frequency (I(r) > 0) is required but I(r) = 0."""


class ConfigError(PlapFreqError, ValueError):
    pass


class InvariantViolation(PlapFreqError, AssertionError):
    """A property that holds by theorem failed numerically."""
