"""
Domain exceptions for laneshare.

Every error raised by the library derives from LaneshareError so callers
(the CLI in particular) can separate domain failures from programming
errors. Scenario and input errors also derive from ValueError and engine
aborts from RuntimeError, matching how the rest of the code base reports
invalid input versus failed operations.
"""

from typing import Any, Optional


class LaneshareError(Exception):
    """Base class for all laneshare errors."""


class ScenarioError(LaneshareError, ValueError):
    """A scenario document is malformed or violates a network invariant.

    Attributes:
        entity: Identifier of the offending entity (node label, edge id,
            stop node, section name), if one applies
    """

    def __init__(self, message: str, entity: Optional[Any] = None):
        super().__init__(message)
        self.entity = entity


class DuplicateNodeId(ScenarioError):
    """Two nodes share the same label."""


class DanglingEdgeEndpoint(ScenarioError):
    """An edge, lane or stop references a node or edge that does not exist."""


class MissingLane(ScenarioError):
    """An edge has no lane, or a bus stop edge has no JointDL lane."""


class DisconnectedGraph(ScenarioError):
    """The road graph is not weakly connected."""


class InvalidTimetable(ScenarioError):
    """Timetable offsets are not strictly increasing or reference bad stops."""


class InvalidBusLine(ScenarioError):
    """A bus line route does not chain over JointDL lanes."""


class NonPositiveCapacity(LaneshareError, ValueError):
    """A capacity used in a travel-time evaluation is not positive."""


class NotAGplEdge(LaneshareError, ValueError):
    """A GPL flow estimate was requested for an edge without a GPL lane."""


class UnknownStop(LaneshareError, ValueError):
    """A stop is not part of a bus's timetable."""


class NoFeasiblePath(LaneshareError, ValueError):
    """No route satisfies the class and exclusion constraints."""


class SimulationAbort(LaneshareError, RuntimeError):
    """The simulation engine detected an invariant violation."""
