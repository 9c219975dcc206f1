"""Exception hierarchy. Every error carries a short machine-readable ``code``."""

from __future__ import annotations


class DistminError(Exception):
    code = "error"


class InvalidGeometryError(DistminError):
    code = "invalid-geometry"


class InvalidMapError(DistminError):
    code = "invalid-map"


class DomainMismatchError(DistminError):
    code = "domain-mismatch"


class InvalidParameterError(DistminError):
    code = "invalid-parameter"


class InvalidScheduleError(DistminError):
    code = "invalid-schedule"


class InsufficientResolutionError(DistminError):
    code = "insufficient-resolution"


class FlowFoldError(DistminError):
    code = "flow-fold"


class HypothesisViolationError(DistminError):
    code = "hypothesis-violation"


class MorphFoldError(DistminError):
    code = "morph-fold"

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class NonMonotoneVolumeError(DistminError):
    code = "non-monotone-volume"
