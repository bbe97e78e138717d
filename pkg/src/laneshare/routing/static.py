"""
Static route planning (SRP).

Routes are assigned at departure from free-flow travel times and never
change. The SrpNoJointDL variant masks every JointDL lane for CAVs, which
emulates a bus-only dedicated lane.
"""

from typing import FrozenSet

from ..core.errors import NoFeasiblePath
from ..core.flowmodel import free_flow_times
from ..core.network import EdgeLane, NodeId, RoadNetwork, Route, VehicleClass, joint_dl_lanes
from .base import FleetSnapshot, Policy, RoutingPolicy
from .dijkstra import prediction_aware_shortest_path


def srp_route(
    net: RoadNetwork,
    origin: NodeId,
    destination: NodeId,
    joint_dl_allowed: bool = True,
    vclass: VehicleClass = VehicleClass.CAV,
) -> Route:
    """Free-flow shortest route for an OD pair.

    Args:
        net: Road network
        origin: Start node id
        destination: End node id
        joint_dl_allowed: When False, CAVs may not use any JointDL lane
        vclass: Vehicle class; HVs are confined to GPL lanes regardless
            of the flag

    Raises:
        NoFeasiblePath: If the destination is unreachable
    """
    excluded_lanes: FrozenSet[EdgeLane] = frozenset()
    if not joint_dl_allowed and vclass is VehicleClass.CAV:
        excluded_lanes = joint_dl_lanes(net)
    return prediction_aware_shortest_path(
        net, free_flow_times(net), origin, destination, vclass, excluded_lanes=excluded_lanes
    )


class SrpPolicy(RoutingPolicy):
    """Fixed free-flow routes, CAVs allowed on the joint DL."""

    policy = Policy.SRP
    joint_dl_allowed = True

    def cav_route(self, snapshot: FleetSnapshot, origin: NodeId, destination: NodeId) -> Route:
        try:
            return self.free_flow_route(
                VehicleClass.CAV, origin, destination, self.joint_dl_allowed
            )
        except NoFeasiblePath:
            self.logger.error(
                f"No route for CAV from {self.net.label(origin)} to {self.net.label(destination)}"
            )
            raise


class SrpNoJointDlPolicy(SrpPolicy):
    """Fixed free-flow routes with the DL reserved for buses."""

    policy = Policy.SRP_NO_JOINT_DL
    joint_dl_allowed = False
