"""
Dynamic route planning (DRP).

Each CAV plans for itself from real-time conditions: the cost of a lane
is the mean time taken by the vehicles that finished it over the
trailing DRP window, or its free-flow time when none did. When a CAV
approaches an intersection it switches to a new route only if that
route is strictly faster than what remains of its current one.
"""

from typing import Dict, List, Mapping, Optional

from ..core.errors import NoFeasiblePath
from ..core.flowmodel import experienced_travel_times
from ..core.fleet import CavState
from ..core.network import EdgeLane, NodeId, RoadNetwork, Route, VehicleClass
from .base import FleetSnapshot, Policy, PolicyEvent, RoutingPolicy
from .dijkstra import prediction_aware_shortest_path, route_cost


def drp_step(
    cav: CavState, costs: Mapping[EdgeLane, float], net: RoadNetwork
) -> Optional[Route]:
    """Better remaining route for a CAV at its next intersection, if any.

    Returns:
        A route from the CAV's head node to its destination whose cost is
        strictly lower than the remaining route's, or None
    """
    current = cav.remaining_route()
    if not current:
        return None
    try:
        best = prediction_aware_shortest_path(
            net, costs, cav.head_node(net), cav.destination, VehicleClass.CAV
        )
    except NoFeasiblePath:
        return None
    if route_cost(best, costs) < route_cost(current, costs):
        return best
    return None


class DrpPolicy(RoutingPolicy):
    """Self-interested rerouting on experienced travel times."""

    policy = Policy.DRP

    def _costs(self, snapshot: FleetSnapshot) -> Dict[EdgeLane, float]:
        return experienced_travel_times(
            self.net, snapshot.travel_log, snapshot.t, self.params.drp_window
        )

    def cav_route(self, snapshot: FleetSnapshot, origin: NodeId, destination: NodeId) -> Route:
        return prediction_aware_shortest_path(
            self.net, self._costs(snapshot), origin, destination, VehicleClass.CAV
        )

    def evaluate(self, snapshot: FleetSnapshot) -> List[PolicyEvent]:
        approaching = [
            cav
            for cav in snapshot.cavs
            if cav.on_edge and cav.exit_time == snapshot.t and cav.next_step() is not None
        ]
        if not approaching:
            return []

        costs = self._costs(snapshot)
        events: List[PolicyEvent] = []
        for cav in approaching:
            new_route = drp_step(cav, costs, self.net)
            if new_route is None:
                continue
            old_route = cav.remaining_route()
            old_cost = route_cost(old_route, costs)
            new_cost = route_cost(new_route, costs)
            cav.replan(new_route)
            self.logger.debug(
                f"CAV {cav.id} switches at node {self.net.label(cav.head_node(self.net))}: "
                f"{old_cost:.1f}s -> {new_cost:.1f}s"
            )
            events.append(
                PolicyEvent(
                    kind="reroute",
                    time=snapshot.t,
                    fields={
                        "policy": self.policy.value,
                        "vehicle": cav.id,
                        "node": self.net.label(cav.head_node(self.net)),
                        "old_route": list(old_route.edges),
                        "route": list(new_route.edges),
                        "lanes": [lane.value for lane in new_route.lane_choice],
                        "old_cost": old_cost,
                        "cost": new_cost,
                    },
                )
            )
        return events
