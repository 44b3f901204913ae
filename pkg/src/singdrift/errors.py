"""Exception hierarchy shared by every module of the lab."""


class LabError(Exception):
    """Base class for all errors raised by singdrift."""


class InvalidParameter(LabError, ValueError):
    pass


class SingularSample(LabError):
    """A drift was evaluated exactly on its singular locus."""


class DegenerateTest(LabError):
    pass


class DimensionMismatch(LabError, ValueError):
    pass


class UnboundedInput(LabError):
    pass


class ScheduleFailure(LabError):
    pass


class StabilityViolation(LabError):
    pass


class RejectedSingularField(LabError):
    pass


class QOutOfRange(LabError, ValueError):
    pass


class POutOfRange(LabError, ValueError):
    pass


class InsufficientSamples(LabError):
    pass


class ConfigInvalid(LabError):
    """Bad experiment or simulation configuration.

    ``location`` carries a ``line N`` or ``field x.y`` diagnostic when known.
    """

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class TimeUnavailable(LabError):
    pass
