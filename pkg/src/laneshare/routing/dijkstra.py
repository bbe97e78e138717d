"""
Prediction-aware shortest path search.

Dijkstra over the road graph where every edge weighs the cheapest lane
the vehicle class may use on it, under whatever travel time table the
caller supplies (anticipated, measured or free-flow). Ties are broken
deterministically: the heap orders by (cost, node id), so equal-cost
nodes expand lowest id first; equal-cost predecessors keep the lowest
edge id; equal-cost lanes keep the JointDL lane.
"""

import heapq
import math
from typing import AbstractSet, Dict, List, Mapping, Optional, Tuple

from ..core.errors import NoFeasiblePath
from ..core.network import EdgeLane, LaneClass, NodeId, RoadNetwork, Route, VehicleClass

__all__ = ["prediction_aware_shortest_path", "route_cost", "cheapest_lane"]


def route_cost(route: Route, costs: Mapping[EdgeLane, float]) -> float:
    """Sum of lane costs along a route, accumulated front to back."""
    total = 0.0
    for step in route.steps():
        total = total + costs[step]
    return total


def cheapest_lane(
    net: RoadNetwork,
    edge_id: int,
    costs: Mapping[EdgeLane, float],
    vclass: VehicleClass,
    excluded_lanes: AbstractSet[EdgeLane] = frozenset(),
) -> Optional[Tuple[LaneClass, float]]:
    """Lowest-cost permitted lane of an edge, or None if no lane is usable."""
    best: Optional[Tuple[LaneClass, float]] = None
    for lane_class in net.permitted_lanes(net.edge(edge_id), vclass, excluded_lanes):
        try:
            cost = costs[(edge_id, lane_class)]
        except KeyError:
            raise KeyError(f"No cost given for edge {edge_id} {lane_class.value} lane") from None
        if cost < 0 or math.isnan(cost):
            raise ValueError(f"Edge {edge_id} {lane_class.value} lane has invalid cost {cost}")
        if best is None or cost < best[1]:
            best = (lane_class, cost)
    return best


def prediction_aware_shortest_path(
    net: RoadNetwork,
    costs: Mapping[EdgeLane, float],
    source: NodeId,
    target: NodeId,
    vclass: VehicleClass = VehicleClass.CAV,
    excluded: AbstractSet[int] = frozenset(),
    excluded_lanes: AbstractSet[EdgeLane] = frozenset(),
) -> Route:
    """Minimum total-cost route between two nodes.

    Args:
        net: Road network
        costs: Travel time of every edge-lane the class may use
        source: Start node id
        target: End node id
        vclass: Vehicle class restricting the usable lanes
        excluded: Edge ids that may not be used at all
        excluded_lanes: (edge, lane) pairs that may not be used

    Returns:
        The cheapest route; the empty route when source == target

    Raises:
        NoFeasiblePath: If the target cannot be reached under the
            restrictions
    """
    if source == target:
        return Route()

    weights: Dict[int, Tuple[LaneClass, float]] = {}
    for edge in net.edges:
        if edge.id in excluded:
            continue
        lane = cheapest_lane(net, edge.id, costs, vclass, excluded_lanes)
        if lane is not None:
            weights[edge.id] = lane

    dist: Dict[NodeId, float] = {source: 0.0}
    via: Dict[NodeId, int] = {}
    done = set()
    heap: List[Tuple[float, NodeId]] = [(0.0, source)]
    while heap:
        d, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        if node == target:
            break
        for edge_id in net.out_edges(node):
            weight = weights.get(edge_id)
            if weight is None:
                continue
            head = net.edge(edge_id).to_node
            if head in done:
                continue
            candidate = d + weight[1]
            known = dist.get(head)
            if known is None or candidate < known or (candidate == known and edge_id < via[head]):
                dist[head] = candidate
                via[head] = edge_id
                heapq.heappush(heap, (candidate, head))

    if target not in done:
        raise NoFeasiblePath(
            f"No {vclass.value} route from node {net.label(source)} to node {net.label(target)}"
        )

    edges: List[int] = []
    node = target
    while node != source:
        edge_id = via[node]
        edges.append(edge_id)
        node = net.edge(edge_id).from_node
    edges.reverse()
    return Route(tuple(edges), tuple(weights[e][0] for e in edges))
