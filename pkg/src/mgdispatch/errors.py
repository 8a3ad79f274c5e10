"""Exception hierarchy shared across the package."""


class MgdispatchError(Exception):
    """Base class for all package errors."""


class SchemaError(MgdispatchError):
    """A data file violates its documented schema."""


class DataError(MgdispatchError):
    """Inputs are schema-valid but physically or referentially inconsistent."""


class SolverError(MgdispatchError):
    """The solver backend failed or returned an unusable status."""


class InfeasibleError(MgdispatchError):
    """An optimization stage has no feasible point.

    ``conflict_tags`` carries constraint tags involved in the conflict when
    the backend reports them (may be empty).
    """

    def __init__(self, message: str, conflict_tags: tuple = ()):
        super().__init__(message)
        self.conflict_tags = tuple(conflict_tags)


class DayAheadInfeasibleError(InfeasibleError):
    """The day-ahead scheduling problem is infeasible."""


class UpdateInfeasibleError(InfeasibleError):
    """The hourly schedule update is infeasible even after the documented fallback."""


class DispatchInfeasibleError(InfeasibleError):
    """Real-time dispatch is infeasible even in relaxed mode (data error)."""
