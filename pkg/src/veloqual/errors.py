"""Domain error hierarchy shared by all pipeline stages."""


class VeloqualError(Exception):
    """Base class for every error this package raises on bad domain input."""


class LineError(VeloqualError):
    """Error tied to a 1-based line number of an input file."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


# ride files
class MissingHeader(VeloqualError):
    pass


class BadFieldCount(LineError):
    pass


class NonMonotonicTimestamp(LineError):
    pass


class EmptyRide(VeloqualError):
    pass


class CropTooLarge(VeloqualError):
    pass


class InvariantViolation(VeloqualError):
    """A value object would violate one of its documented invariants."""


# preprocessing
class AlreadyDownsampled(VeloqualError):
    pass


class RideTooShort(VeloqualError):
    pass


class SegmentTooShort(VeloqualError):
    pass


class EmptySeries(VeloqualError):
    pass


# geometry
class OutOfLocalRange(VeloqualError):
    pass


class OutOfTimeRange(VeloqualError):
    pass


class OutOfRange(VeloqualError):
    pass


# routing
class NoSnap(VeloqualError):
    pass


class Unreachable(VeloqualError):
    pass


# synthetic worlds
class DisconnectedRoute(VeloqualError):
    pass
