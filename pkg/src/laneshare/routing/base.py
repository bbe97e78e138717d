"""
Base classes and utilities for laneshare routing policies.

This module provides the foundation shared by every policy:
- The Policy enumeration used on the command line and in reports
- FleetSnapshot, the per-tick view of the fleet handed to policies
- RoutingPolicy, the base class with common route helpers and logging

All policies inherit from RoutingPolicy so the engine can drive them
uniformly: one call to route a new CAV, one call per tick to let the
policy inspect the fleet and commit any route changes.
"""

from dataclasses import dataclass, field
from enum import Enum
import logging
from typing import Any, ClassVar, Dict, FrozenSet, List, Sequence, Tuple

from ..config.models import ScenarioParams
from ..core.flowmodel import (
    FlowModelParams,
    HvEntryLog,
    SensorLog,
    TravelTimeLog,
    free_flow_times,
)
from ..core.fleet import BusState, CavState
from ..core.network import (
    EdgeLane,
    NodeId,
    RoadNetwork,
    Route,
    VehicleClass,
    joint_dl_lanes,
)
from .dijkstra import prediction_aware_shortest_path


class Policy(str, Enum):
    """Routing policies compared by the experiments."""

    SRP = "srp"
    DRP = "drp"
    COORDINATED = "coordinated"
    SRP_NO_JOINT_DL = "srp-no-joint-dl"

    @property
    def label(self) -> str:
        return {
            Policy.SRP: "SRP",
            Policy.DRP: "DRP",
            Policy.COORDINATED: "Coordinated",
            Policy.SRP_NO_JOINT_DL: "SRP w/o joint DL",
        }[self]


@dataclass(frozen=True)
class FleetSnapshot:
    """What a policy may look at during one tick.

    The vehicle lists are the engine's live state objects, read within a
    single-threaded tick; policies change them only through their own
    commit step. `departures` lists bus runs not yet dispatched, earliest
    first.
    """

    t: int
    cavs: Sequence[CavState]
    buses: Sequence[BusState]
    sensors: SensorLog
    hv_log: HvEntryLog
    travel_log: TravelTimeLog = field(default_factory=TravelTimeLog)
    departures: Sequence[BusState] = ()


@dataclass(frozen=True)
class PolicyEvent:
    """A decision a policy reports to the event trace."""

    kind: str
    time: int
    fields: Dict[str, Any]


class RoutingPolicy:
    """Base class for routing policies.

    Provides common functionality used by all policies:
    - Free-flow routing with per-OD caching (HV routes, SRP routes)
    - Standardized per-policy logging
    - A default no-op tick evaluation
    """

    policy: ClassVar[Policy]

    def __init__(self, net: RoadNetwork, params: ScenarioParams):
        """Initialize the policy.

        Args:
            net: Road network shared by every run
            params: Scenario parameters (flow model, trigger, windows)
        """
        self.net = net
        self.params = params
        self.flow_params = FlowModelParams.from_scenario(params)
        self.logger = logging.getLogger(f"laneshare.router.{self.__class__.__name__.lower()}")
        self._free_flow = free_flow_times(net)
        self._free_flow_routes: Dict[Tuple[VehicleClass, NodeId, NodeId, bool], Route] = {}

    def free_flow_route(
        self,
        vclass: VehicleClass,
        origin: NodeId,
        destination: NodeId,
        joint_dl_allowed: bool = True,
    ) -> Route:
        """Cached free-flow shortest route for a class and OD pair.

        Raises:
            NoFeasiblePath: If the destination is unreachable for the class
        """
        key = (vclass, origin, destination, joint_dl_allowed)
        route = self._free_flow_routes.get(key)
        if route is None:
            excluded_lanes: FrozenSet[EdgeLane] = frozenset()
            if not joint_dl_allowed and vclass is VehicleClass.CAV:
                excluded_lanes = joint_dl_lanes(self.net)
            route = prediction_aware_shortest_path(
                self.net,
                self._free_flow,
                origin,
                destination,
                vclass,
                excluded_lanes=excluded_lanes,
            )
            self._free_flow_routes[key] = route
        return route

    def hv_route(self, origin: NodeId, destination: NodeId) -> Route:
        """HVs follow the shortest free-flow GPL route, whatever the policy."""
        return self.free_flow_route(VehicleClass.HV, origin, destination)

    def cav_route(self, snapshot: FleetSnapshot, origin: NodeId, destination: NodeId) -> Route:
        """Initial route of a CAV spawning at `snapshot.t`."""
        raise NotImplementedError

    def evaluate(self, snapshot: FleetSnapshot) -> List[PolicyEvent]:
        """Inspect the fleet at one tick and commit route changes."""
        return []
