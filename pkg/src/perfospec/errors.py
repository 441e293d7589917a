"""Exception hierarchy shared by all perfospec modules."""


class PerfospecError(Exception):
    """Base class for every error raised by the library."""


class NonSimpleCurve(PerfospecError):
    pass


class GeometryError(PerfospecError):
    pass


class RefinementStall(PerfospecError):
    pass


class SingularElement(PerfospecError):
    pass


class OutsideDomain(PerfospecError):
    pass


class InsufficientSamples(PerfospecError):
    pass


class FactorizationFailure(PerfospecError):
    pass


class NoConvergence(PerfospecError):
    pass


class DegenerateMode(PerfospecError):
    pass


class RootNotBracketed(PerfospecError):
    pass


class CoincidentPoints(PerfospecError):
    pass


class OutsideDisk(PerfospecError):
    pass


class OutsideValidity(PerfospecError):
    pass


class TrackingError(PerfospecError):
    """Best eigenfunction overlap fell below the acceptance threshold."""


class AmbiguousMatch(TrackingError):
    pass


class IllConditionedFit(PerfospecError):
    pass


class StudyError(PerfospecError):
    """Wraps a failure inside one (eps, level) cell of a study."""

    def __init__(self, message, eps=None, level=None):
        self.eps = eps
        self.level = level
        ctx = []
        if eps is not None:
            ctx.append(f"eps={eps:g}")
        if level is not None:
            ctx.append(f"level={level}")
        if ctx:
            message = f"{message} [{', '.join(ctx)}]"
        super().__init__(message)
