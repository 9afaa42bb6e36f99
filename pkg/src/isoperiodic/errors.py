"""Exception hierarchy shared by all modules."""


class IsoperiodicError(Exception):
    """Base class for every error raised by the package."""


# numerics
class NonConvergence(IsoperiodicError):
    def __init__(self, message, error_estimate=None):
        super().__init__(message)
        self.error_estimate = error_estimate


class StepSizeUnderflow(IsoperiodicError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class MaxStepsExceeded(IsoperiodicError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class RhsEvaluationError(IsoperiodicError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class EvaluationError(IsoperiodicError):
    pass


# curve
class DegenerateCurve(IsoperiodicError):
    pass


class BranchPointCollision(IsoperiodicError):
    pass


class ContinuationAmbiguity(IsoperiodicError):
    pass


class OrientationError(IsoperiodicError):
    pass


class PoleAtRamification(IsoperiodicError):
    pass


class PoleCollision(IsoperiodicError):
    pass


class RegionError(IsoperiodicError):
    pass


# bell
class PartitionBoundExceeded(IsoperiodicError):
    pass


# flow
class DegenerateDeformation(IsoperiodicError):
    pass


class BellSingularity(IsoperiodicError):
    pass


class RegionExit(IsoperiodicError):
    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


# boussinesq
class TruncationInsufficient(IsoperiodicError):
    pass


class ThetaDivisorProximity(IsoperiodicError):
    pass


class IllConditioned(IsoperiodicError):
    pass


# cli
class ConfigError(IsoperiodicError):
    def __init__(self, message, field=None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
