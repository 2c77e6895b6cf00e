"""Exception hierarchy for the synthesis toolkit."""


class RTIError(Exception):
    """Base class for all toolkit errors."""


class RootFindingError(RTIError):
    """Polynomial root computation failed or produced non-finite values."""


class ImproperPlantError(RTIError, ValueError):
    """The plant has negative relative degree."""


class UnsupportedRelativeDegreeError(RTIError):
    """Plants of relative degree three or more are not handled."""


class PIPViolationError(RTIError):
    """The plant fails the parity interlacing property.

    The attached ``report`` carries the witness zero pair.
    """

    def __init__(self, report, message=None):
        self.report = report
        if message is None:
            lo, hi = report.witness
            message = (
                f"parity interlacing property violated: odd number of real "
                f"positive poles between zeros {lo:g} and {hi:g}"
            )
        super().__init__(message)


class LogDomainError(RTIError):
    """D(z) is not positive at a real RHP zero, so its logarithm is undefined."""


class SingularSystemError(RTIError):
    """The interpolation system is singular or too ill-conditioned to trust."""


class TuningError(RTIError):
    """Exponent tuning failed to reach an integer design.

    ``state`` holds the best state seen (possibly ``None``).
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class IntegerizationError(TuningError):
    """Snapped integer exponents fail the interpolation re-check."""


class RealizationError(RTIError):
    """The controller could not be realized as a proper rational function."""


class SimulationError(RTIError):
    """Step-response simulation refused (unstable system, bad step size)."""
