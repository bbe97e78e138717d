"""
Road network model for laneshare.

This module holds the directed road graph and its utilities:
- Nodes (intersections and bus stations), edges and their lanes
- Routes as chained edge sequences with a per-edge lane choice
- Loading and validation from a scenario document
- Class-aware route enumeration (feasible route sets)

Each edge carries up to two lanes, a joint dedicated lane (shared by
buses and CAVs) and a general-purpose lane (shared by HVs and CAVs).
Bus stations are not traversed by routes: a station is an attribute of
the DL edge it sits on.

RoadNetwork is immutable after loading and safe to share between
simulation runs.
"""

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
import itertools
import logging
from typing import (
    AbstractSet,
    Dict,
    FrozenSet,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
)

import networkx as nx

from ..config.models import ScenarioDocument
from .errors import (
    DanglingEdgeEndpoint,
    DisconnectedGraph,
    DuplicateNodeId,
    MissingLane,
    ScenarioError,
)

logger = logging.getLogger("laneshare.network")

NodeId = int


class NodeKind(str, Enum):
    INTERSECTION = "intersection"
    BUS_STATION = "station"


class LaneClass(str, Enum):
    """Lane classes. Declaration order is the lane tie-break order."""

    JOINT_DL = "dl"
    GPL = "gpl"


class VehicleClass(str, Enum):
    HV = "hv"
    CAV = "cav"
    BUS = "bus"


EdgeLane = Tuple[int, LaneClass]

PERMITTED_LANES: Mapping[VehicleClass, Tuple[LaneClass, ...]] = {
    VehicleClass.HV: (LaneClass.GPL,),
    VehicleClass.BUS: (LaneClass.JOINT_DL,),
    VehicleClass.CAV: (LaneClass.JOINT_DL, LaneClass.GPL),
}


@dataclass(frozen=True)
class Node:
    id: NodeId
    label: int
    kind: NodeKind
    position: Tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class Lane:
    lane_class: LaneClass
    capacity: float
    free_flow_time: float


@dataclass(frozen=True)
class Edge:
    id: int
    from_node: NodeId
    to_node: NodeId
    lanes: Tuple[Lane, ...]
    bus_stop: Optional[NodeId] = None

    @property
    def free_flow_time(self) -> float:
        return self.lanes[0].free_flow_time

    def has_lane(self, lane_class: LaneClass) -> bool:
        return any(lane.lane_class is lane_class for lane in self.lanes)

    def lane(self, lane_class: LaneClass) -> Lane:
        """Return the lane of the given class.

        Raises:
            MissingLane: If the edge has no lane of that class
        """
        for lane in self.lanes:
            if lane.lane_class is lane_class:
                return lane
        raise MissingLane(
            f"Edge {self.id} has no {lane_class.value} lane", entity=self.id
        )


@dataclass(frozen=True)
class Route:
    """An ordered edge sequence with the lane used on each edge."""

    edges: Tuple[int, ...] = ()
    lane_choice: Tuple[LaneClass, ...] = ()

    def __post_init__(self) -> None:
        if len(self.edges) != len(self.lane_choice):
            raise ValueError("Route needs exactly one lane choice per edge")

    def __len__(self) -> int:
        return len(self.edges)

    def steps(self) -> Iterator[EdgeLane]:
        return zip(self.edges, self.lane_choice)

    def step(self, index: int) -> EdgeLane:
        return self.edges[index], self.lane_choice[index]

    def suffix(self, start: int) -> "Route":
        return Route(self.edges[start:], self.lane_choice[start:])

    def concat(self, other: "Route") -> "Route":
        return Route(self.edges + other.edges, self.lane_choice + other.lane_choice)

    def uses(self, edge_lane: EdgeLane) -> bool:
        return edge_lane in set(self.steps())


class RoadNetwork:
    """Directed road graph with per-edge lane records.

    Node ids are dense indices in document order; the map labels used by
    scenario documents and reports are kept on each Node and translated
    with `node_id()` / `label()`.
    """

    def __init__(self, nodes: Sequence[Node], edges: Sequence[Edge]):
        self.nodes: Tuple[Node, ...] = tuple(nodes)
        self.edges: Tuple[Edge, ...] = tuple(sorted(edges, key=lambda e: e.id))
        self._edges_by_id: Dict[int, Edge] = {e.id: e for e in self.edges}
        self._label_index: Dict[int, NodeId] = {n.label: n.id for n in self.nodes}

        outgoing: List[List[int]] = [[] for _ in self.nodes]
        for edge in self.edges:
            outgoing[edge.from_node].append(edge.id)
        self.adjacency: Tuple[Tuple[int, ...], ...] = tuple(tuple(a) for a in outgoing)

        self.graph = nx.MultiDiGraph()
        self.graph.add_nodes_from(n.id for n in self.nodes)
        for edge in self.edges:
            self.graph.add_edge(edge.from_node, edge.to_node, key=edge.id)

    def __repr__(self) -> str:
        return f"RoadNetwork(nodes={len(self.nodes)}, edges={len(self.edges)})"

    def node_id(self, label: int) -> NodeId:
        """Translate a map label into a dense node id."""
        try:
            return self._label_index[label]
        except KeyError:
            raise DanglingEdgeEndpoint(f"Unknown node label {label}", entity=label) from None

    def label(self, node: NodeId) -> int:
        return self.nodes[node].label

    def edge(self, edge_id: int) -> Edge:
        return self._edges_by_id[edge_id]

    def has_edge(self, edge_id: int) -> bool:
        return edge_id in self._edges_by_id

    def lane(self, edge_lane: EdgeLane) -> Lane:
        edge_id, lane_class = edge_lane
        return self.edge(edge_id).lane(lane_class)

    def out_edges(self, node: NodeId) -> Tuple[int, ...]:
        return self.adjacency[node]

    def edge_lanes(self) -> Iterator[EdgeLane]:
        """Iterate over every (edge id, lane class) pair in id order."""
        for edge in self.edges:
            for lane in edge.lanes:
                yield edge.id, lane.lane_class

    def find_edge(self, from_node: NodeId, to_node: NodeId) -> Optional[Edge]:
        """Lowest-id edge from one node to another, if any."""
        for edge_id in self.adjacency[from_node]:
            edge = self._edges_by_id[edge_id]
            if edge.to_node == to_node:
                return edge
        return None

    def route_nodes(self, route: Route, start: NodeId) -> List[NodeId]:
        """Node sequence visited by a route that begins at `start`."""
        nodes = [start]
        for edge_id in route.edges:
            nodes.append(self.edge(edge_id).to_node)
        return nodes

    def route_free_flow_time(self, route: Route) -> float:
        return sum(self.edge(e).free_flow_time for e in route.edges)

    def check_route(
        self,
        route: Route,
        vclass: Optional[VehicleClass] = None,
        start: Optional[NodeId] = None,
        end: Optional[NodeId] = None,
    ) -> None:
        """Verify chaining, lane presence and class legality of a route.

        Raises:
            ValueError: Naming the first violated property
        """
        previous_head = start
        for index, (edge_id, lane_class) in enumerate(route.steps()):
            edge = self.edge(edge_id)
            if previous_head is not None and edge.from_node != previous_head:
                raise ValueError(
                    f"Route breaks at position {index}: edge {edge_id} does not "
                    f"start at node {self.label(previous_head)}"
                )
            if not edge.has_lane(lane_class):
                raise ValueError(f"Edge {edge_id} has no {lane_class.value} lane")
            if vclass is not None and lane_class not in PERMITTED_LANES[vclass]:
                raise ValueError(
                    f"{vclass.value} may not use the {lane_class.value} lane of edge {edge_id}"
                )
            previous_head = edge.to_node
        if end is not None and previous_head is not None and previous_head != end:
            raise ValueError(
                f"Route ends at {self.label(previous_head)}, not {self.label(end)}"
            )

    def permitted_lanes(
        self,
        edge: Edge,
        vclass: VehicleClass,
        excluded_lanes: AbstractSet[EdgeLane] = frozenset(),
    ) -> Tuple[LaneClass, ...]:
        """Lane classes of `edge` usable by `vclass`, in tie-break order."""
        return tuple(
            lane_class
            for lane_class in PERMITTED_LANES[vclass]
            if edge.has_lane(lane_class) and (edge.id, lane_class) not in excluded_lanes
        )


@dataclass(frozen=True)
class FeasibleRoutes:
    """The set of class-legal simple routes between two nodes.

    `exists` is answered by a linear-time reachability query; iterating
    enumerates every simple path and every permitted lane assignment
    along it, which is exponential and meant for small networks.
    """

    network: RoadNetwork
    source: NodeId
    target: NodeId
    graph: nx.MultiDiGraph = field(repr=False)
    lanes: Mapping[int, Tuple[LaneClass, ...]] = field(repr=False)

    @property
    def exists(self) -> bool:
        return self.source == self.target or nx.has_path(self.graph, self.source, self.target)

    def __iter__(self) -> Iterator[Route]:
        if self.source == self.target:
            yield Route()
            return
        for path in nx.all_simple_edge_paths(self.graph, self.source, self.target):
            edge_ids = tuple(key for _, _, key in path)
            for choice in itertools.product(*(self.lanes[e] for e in edge_ids)):
                yield Route(edge_ids, tuple(choice))


def feasible_routes(
    net: RoadNetwork,
    source: NodeId,
    target: NodeId,
    vclass: VehicleClass,
    excluded: AbstractSet[int] = frozenset(),
    excluded_lanes: AbstractSet[EdgeLane] = frozenset(),
) -> FeasibleRoutes:
    """Build the feasible route set between two nodes for a vehicle class.

    Args:
        net: Road network
        source: Start node id
        target: End node id
        vclass: Vehicle class; restricts usable lanes (HV: GPL, bus: DL,
            CAV: either)
        excluded: Edge ids that may not be used at all
        excluded_lanes: Individual (edge, lane) pairs that may not be used

    Returns:
        FeasibleRoutes with an existence query and a route enumerator
    """
    graph = nx.MultiDiGraph()
    graph.add_nodes_from(range(len(net.nodes)))
    lanes: Dict[int, Tuple[LaneClass, ...]] = {}
    for edge in net.edges:
        if edge.id in excluded:
            continue
        permitted = net.permitted_lanes(edge, vclass, excluded_lanes)
        if permitted:
            lanes[edge.id] = permitted
            graph.add_edge(edge.from_node, edge.to_node, key=edge.id)
    return FeasibleRoutes(net, source, target, graph, lanes)


def collect_network_issues(doc: ScenarioDocument) -> List[ScenarioError]:
    """Check every network invariant of a scenario document.

    Returns all problems found rather than stopping at the first, so
    that validation can report them together. Each error names the
    offending entity.
    """
    issues: List[ScenarioError] = []

    label_counts = Counter(n.id for n in doc.nodes)
    for label, count in sorted(label_counts.items()):
        if count > 1:
            issues.append(DuplicateNodeId(f"Node {label} is declared {count} times", entity=label))
    kinds = {n.id: n.kind for n in doc.nodes}

    edge_counts = Counter(e.id for e in doc.edges)
    for edge_id, count in sorted(edge_counts.items()):
        if count > 1:
            issues.append(
                ScenarioError(f"Edge {edge_id} is declared {count} times", entity=edge_id)
            )

    dangling = False
    for edge in doc.edges:
        for end in (edge.from_node, edge.to_node):
            if end not in kinds:
                dangling = True
                issues.append(
                    DanglingEdgeEndpoint(
                        f"Edge {edge.id} references unknown node {end}", entity=edge.id
                    )
                )
            elif kinds[end] != "intersection":
                issues.append(
                    ScenarioError(
                        f"Edge {edge.id} ends at station {end}; stations sit on edges",
                        entity=edge.id,
                    )
                )
        if edge.from_node == edge.to_node:
            issues.append(ScenarioError(f"Edge {edge.id} is a self-loop", entity=edge.id))
        if edge.bus_stop is not None:
            if edge.bus_stop not in kinds:
                dangling = True
                issues.append(
                    DanglingEdgeEndpoint(
                        f"Edge {edge.id} hosts unknown station {edge.bus_stop}",
                        entity=edge.id,
                    )
                )
            elif kinds[edge.bus_stop] != "station":
                issues.append(
                    ScenarioError(
                        f"Edge {edge.id} bus_stop {edge.bus_stop} is not a station",
                        entity=edge.id,
                    )
                )

    edge_ids = set(edge_counts)
    lane_classes: Dict[int, List[str]] = {e: [] for e in edge_ids}
    for lane in doc.lanes:
        if lane.edge not in edge_ids:
            issues.append(
                DanglingEdgeEndpoint(
                    f"Lane {lane.lane_class} references unknown edge {lane.edge}",
                    entity=lane.edge,
                )
            )
            continue
        if lane.lane_class in lane_classes[lane.edge]:
            issues.append(
                ScenarioError(
                    f"Edge {lane.edge} declares two {lane.lane_class} lanes", entity=lane.edge
                )
            )
        lane_classes[lane.edge].append(lane.lane_class)

    for edge in doc.edges:
        classes = lane_classes.get(edge.id, [])
        if not classes:
            issues.append(MissingLane(f"Edge {edge.id} has no lanes", entity=edge.id))
        elif edge.bus_stop is not None and "dl" not in classes:
            issues.append(
                MissingLane(
                    f"Edge {edge.id} hosts station {edge.bus_stop} but has no dl lane",
                    entity=edge.id,
                )
            )

    hosts = Counter(e.bus_stop for e in doc.edges if e.bus_stop is not None)
    for node in doc.nodes:
        if node.kind == "station" and hosts.get(node.id, 0) != 1:
            issues.append(
                ScenarioError(
                    f"Station {node.id} must sit on exactly one edge "
                    f"(found {hosts.get(node.id, 0)})",
                    entity=node.id,
                )
            )

    if not dangling and doc.nodes:
        graph = nx.DiGraph()
        graph.add_nodes_from(kinds)
        for edge in doc.edges:
            graph.add_edge(edge.from_node, edge.to_node)
            if edge.bus_stop is not None:
                graph.add_edge(edge.from_node, edge.bus_stop)
        if not nx.is_weakly_connected(graph):
            components = sorted(
                (sorted(c) for c in nx.weakly_connected_components(graph)),
                key=lambda c: c[0],
            )
            stray = components[1][0]
            issues.append(
                DisconnectedGraph(
                    f"Road graph is not connected: node {stray} is unreachable "
                    f"from node {components[0][0]}",
                    entity=stray,
                )
            )

    return issues


def load_network(doc: ScenarioDocument) -> RoadNetwork:
    """Build a validated RoadNetwork from a scenario document.

    Args:
        doc: Parsed scenario document

    Returns:
        RoadNetwork satisfying all structural invariants

    Raises:
        ScenarioError: The first invariant violation found (a
            DuplicateNodeId, DanglingEdgeEndpoint, MissingLane or
            DisconnectedGraph, among others)
    """
    issues = collect_network_issues(doc)
    if issues:
        raise issues[0]

    nodes = [
        Node(
            id=index,
            label=spec.id,
            kind=NodeKind(spec.kind),
            position=(spec.x, spec.y),
        )
        for index, spec in enumerate(doc.nodes)
    ]
    index_of = {n.label: n.id for n in nodes}
    defaults = {
        LaneClass.JOINT_DL: doc.params.default_capacity_dl,
        LaneClass.GPL: doc.params.default_capacity_gpl,
    }

    lanes_by_edge: Dict[int, List[Lane]] = {e.id: [] for e in doc.edges}
    free_flow = {e.id: e.free_flow_time for e in doc.edges}
    for spec in doc.lanes:
        lane_class = LaneClass(spec.lane_class)
        capacity = spec.capacity if spec.capacity is not None else defaults[lane_class]
        lanes_by_edge[spec.edge].append(Lane(lane_class, capacity, free_flow[spec.edge]))

    order = list(LaneClass)
    for lanes in lanes_by_edge.values():
        lanes.sort(key=lambda lane: order.index(lane.lane_class))
    edges = [
        Edge(
            id=spec.id,
            from_node=index_of[spec.from_node],
            to_node=index_of[spec.to_node],
            lanes=tuple(lanes_by_edge[spec.id]),
            bus_stop=index_of[spec.bus_stop] if spec.bus_stop is not None else None,
        )
        for spec in doc.edges
    ]

    net = RoadNetwork(nodes, edges)
    logger.debug(f"Loaded network '{doc.name}': {net}")
    return net


def joint_dl_lanes(net: RoadNetwork) -> FrozenSet[EdgeLane]:
    """Every JointDL edge-lane of the network."""
    return frozenset(step for step in net.edge_lanes() if step[1] is LaneClass.JOINT_DL)
