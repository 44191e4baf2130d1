"""Exception hierarchy shared by every module of the simulator."""


class SimError(Exception):
    """Base class for simulator errors."""


class GeometryError(SimError, ValueError):
    pass


class OddDimension(GeometryError):
    pass


class TooSmall(GeometryError):
    pass


class BadOrder(SimError, ValueError):
    """Group order N < 2."""


class DimMismatch(SimError, ValueError):
    pass


class DuplicateTarget(SimError, ValueError):
    pass


class OutOfRange(SimError, ValueError):
    pass


class SameMode(SimError, ValueError):
    pass


class NoAncilla(SimError, ValueError):
    pass


class LayoutMismatch(SimError, ValueError):
    pass


class TooLarge(SimError, MemoryError):
    """Requested dimension exceeds a configured resource guard."""


class AncillaNotReady(SimError, RuntimeError):
    """Ancilla is not in the uniform product state at the start of a routine."""

    def __init__(self, message: str, defect: float = float("nan")):
        super().__init__(message)
        self.defect = defect


class InconsistentPlan(SimError, ValueError):
    pass


class WrongGroupOrder(SimError, ValueError):
    """Atomic pulse layer only supports N = 2."""


class ConfigError(SimError, ValueError):
    pass
