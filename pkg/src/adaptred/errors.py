"""Exception hierarchy for the reduction pipeline."""


class AdaptredError(Exception):
    """Base class for all package errors."""


class ParameterRangeError(AdaptredError):
    """Adaptive parameter outside its declared bounds."""


class NumericalDomainError(AdaptredError):
    """A model evaluation produced a non-finite value."""

    def __init__(self, msg, component=None):
        super().__init__(msg)
        self.component = component


class OrbitNotFoundError(AdaptredError):
    """Shooting Newton failed to converge."""

    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class ContinuationError(AdaptredError):
    """Family continuation failed partway through a parameter grid."""

    def __init__(self, msg, completed=None):
        super().__init__(msg)
        self.completed = completed if completed is not None else []


class AnchoringError(AdaptredError):
    """The anchor condition is never attained on the orbit."""


class UnsupportedSpectrumError(AdaptredError):
    """A retained Floquet exponent is complex; only real spectra are handled."""


class AccuracyError(AdaptredError):
    """A transported curve failed its periodicity check."""


class StiffnessError(AdaptredError):
    """Backward adjoint relaxation did not become periodic."""


class StepSizeError(AdaptredError):
    """Hessian estimate asymmetric beyond tolerance; try a different step."""


class GridError(AdaptredError):
    """Parameter grid too sparse for the requested finite differences."""


class ExtrapolationError(AdaptredError):
    """Query outside the convex hull of the tabulated parameter grid."""


class DivergenceError(AdaptredError):
    """Full-model state left the declared working box."""

    def __init__(self, msg, time=None):
        super().__init__(msg)
        self.time = time


class ReductionInvalidError(AdaptredError):
    """Assumptions of a reduction violated (e.g. extended reduction left the hull)."""


class ReductionBreakdownError(AdaptredError):
    """A retained isostable coordinate exceeded its configured ceiling."""

    def __init__(self, msg, time=None, psi=None):
        super().__init__(msg)
        self.time = time
        self.psi = psi


class StrategySingularError(AdaptredError):
    """Cancel strategy denominator fell below its floor."""


class BasinError(AdaptredError):
    """Direct-method integration did not converge to the orbit."""


class ContaminationError(AdaptredError):
    """Direct isostable fit residual too large (faster modes not decayed)."""


class InsufficientCyclesError(AdaptredError):
    """Trajectory contains too few anchor events for phase extraction."""


class MonitorIncompleteError(AdaptredError):
    """Shadow run for the truncation monitor diverged."""


class ConfigError(AdaptredError):
    """Scenario or model configuration is invalid."""

    def __init__(self, msg, problems=None):
        super().__init__(msg)
        self.problems = problems if problems is not None else []
