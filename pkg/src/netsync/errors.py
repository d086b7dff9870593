"""Exception hierarchy shared across the toolkit."""


class NetsyncError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(NetsyncError):
    """Matrix dimensions are inconsistent with the requested operation."""


class DegenerateSystemError(NetsyncError):
    """System pencil is rank deficient for every finite frequency."""


class PlacementError(NetsyncError):
    """Pole placement failed (uncontrollable pair or ill conditioning)."""


class UnsupportedAgentError(NetsyncError):
    """Agent cannot be homogenized (e.g. unstabilizable internal dynamics)."""


class GainDesignError(NetsyncError):
    """Requested protocol gains violate the design contract."""


class ScenarioParseError(NetsyncError):
    """Scenario file is syntactically or structurally invalid (exit code 2)."""


class AssumptionError(NetsyncError):
    """Scenario violates a model or graph-class assumption (exit code 3).

    ``diagnostics`` carries one human-readable line per violated condition.
    """

    def __init__(self, message, diagnostics=None):
        self.diagnostics = list(diagnostics) if diagnostics else [message]
        if diagnostics:
            message = message + ": " + "; ".join(self.diagnostics)
        super().__init__(message)


class DivergenceError(NetsyncError):
    """Simulation produced a non-finite or runaway state (exit code 4)."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time
