"""
Exception hierarchy for the Calabi/Mabuchi lab.

Every failure the lab can report is a LabError, so the CLI can map it to an
exit status without catching unrelated bugs.
"""

from typing import Optional


class LabError(Exception):
    """Base class for every lab failure."""


class InvalidExponentError(LabError, ValueError):
    def __init__(self, message: str, p: Optional[float] = None, q: Optional[float] = None):
        super().__init__(message)
        self.p = p
        self.q = q


class OctantViolationError(LabError, ValueError):
    def __init__(self, atom: int, value: float):
        super().__init__(f"function leaves the positive octant at atom {atom} (value {value:.3e})")
        self.atom = atom
        self.value = value


class ShapeError(LabError, ValueError):
    pass


class DomainError(LabError, ValueError):
    pass


class CurveError(LabError, ValueError):
    pass


class NotComparableError(LabError):
    def __init__(self, perimeter: float, bound: float):
        super().__init__(f"triangle perimeter {perimeter:.6f} reaches the model bound {bound:.6f}")
        self.perimeter = perimeter
        self.bound = bound


class RankError(LabError):
    def __init__(self, rank: int):
        super().__init__(f"triangle span has rank {rank}, expected 3")
        self.rank = rank


class ResolutionError(LabError, ValueError):
    pass


class NotKahlerError(LabError):
    """Density of a potential fell below the positivity floor."""

    def __init__(self, site: int, value: float, floor: float):
        super().__init__(f"density {value:.3e} at site {site} is below the Kähler floor {floor:.1e}")
        self.site = site
        self.value = value
        self.floor = floor


class InconsistencyError(LabError, ValueError):
    def __init__(self, mean: float):
        super().__init__(f"density has mean {mean:.12f}; Calabi-Yau inversion needs mean 1")
        self.mean = mean


class NumericError(LabError):
    pass


class FlowDegenerationError(LabError):
    def __init__(self, time: float, reason: str):
        super().__init__(f"flow degenerated at t={time:.6g}: {reason}")
        self.time = time


class StiffnessError(LabError):
    def __init__(self, time: float, rejections: int):
        super().__init__(f"{rejections} rejected steps by t={time:.6g}; reduce dt")
        self.time = time
        self.rejections = rejections


class FlowKindError(LabError, ValueError):
    pass


class FitDomainError(LabError, ValueError):
    def __init__(self, index: int, value: float):
        super().__init__(f"exponential fit needs positive values; got {value!r} at index {index}")
        self.index = index


class ConstructionError(LabError):
    pass


class ScheduleError(LabError):
    def __init__(self, level: int, message: str = ""):
        super().__init__(message or f"level set U_{level} has no grid mass; choose a steeper profile or finer grid")
        self.level = level


class PreconditionError(LabError, ValueError):
    pass


class UsageError(LabError):
    pass
