"""
Vehicle state, bus timetables and demand generation for laneshare.

This module covers everything the simulation knows about vehicles:
- Per-class route state (HV, CAV, bus) with a cursor over the route
- Bus timetables built from the scenario's bus lines
- Free-flow arrival propagation and bus arrival estimates
- Schedule deviation against the timetable
- Seeded demand generation (fixed-interval or Poisson arrivals)

Vehicle state is mutated only by the simulation loop. Buses keep the
route they were created with; CAV routes are replaced from the current
intersection onwards; HVs only ever advance.
"""

from dataclasses import dataclass, field
from fractions import Fraction
import logging
from typing import ClassVar, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..config.models import BusLineSpec, DemandStream, ScenarioDocument
from .errors import InvalidBusLine, InvalidTimetable, ScenarioError, UnknownStop
from .network import EdgeLane, LaneClass, NodeId, NodeKind, RoadNetwork, Route, VehicleClass

logger = logging.getLogger("laneshare.fleet")

__all__ = [
    "VehicleClass",
    "VehicleState",
    "CavState",
    "HvState",
    "BusState",
    "Timetable",
    "SpawnRequest",
    "DemandGenerator",
    "propagate_arrival",
    "bus_estimate_next",
    "schedule_deviation",
    "is_on_time",
    "spawn_demand",
    "build_bus_route",
    "build_timetable",
    "collect_bus_line_issues",
    "initial_bus_states",
]


@dataclass(kw_only=True)
class VehicleState:
    """Route state shared by every vehicle class.

    `cursor` is the index of the edge the vehicle is on; -1 means it has
    spawned but not yet entered its first edge.
    """

    vclass: ClassVar[VehicleClass]

    id: int
    origin: NodeId
    destination: NodeId
    route: Route
    spawn_time: int
    cursor: int = -1
    entry_time: int = -1
    exit_time: int = -1
    completed_time: Optional[int] = None

    @property
    def on_edge(self) -> bool:
        return self.cursor >= 0 and self.completed_time is None

    @property
    def completed(self) -> bool:
        return self.completed_time is not None

    def current_step(self) -> Optional[EdgeLane]:
        if 0 <= self.cursor < len(self.route):
            return self.route.step(self.cursor)
        return None

    def next_step(self) -> Optional[EdgeLane]:
        if self.completed_time is not None or self.cursor + 1 >= len(self.route):
            return None
        return self.route.step(self.cursor + 1)

    def head_node(self, net: RoadNetwork) -> NodeId:
        """The intersection the vehicle is heading for."""
        if self.cursor < 0:
            return self.origin
        return net.edge(self.route.edges[self.cursor]).to_node

    def next_entry_time(self, net: RoadNetwork) -> float:
        """Free-flow estimate of when the vehicle enters its next edge."""
        if self.cursor < 0:
            return self.spawn_time
        return propagate_arrival(self, net.edge(self.route.edges[self.cursor]).free_flow_time)

    def enter(self, t: int, exit_time: int) -> EdgeLane:
        """Advance onto the next route edge at time t."""
        step = self.next_step()
        if step is None:
            raise ValueError(f"Vehicle {self.id} has no edge left to enter")
        self.cursor += 1
        self.entry_time = t
        self.exit_time = exit_time
        return step

    def travel_time(self) -> Optional[int]:
        if self.completed_time is None:
            return None
        return self.completed_time - self.spawn_time


@dataclass(kw_only=True)
class HvState(VehicleState):
    vclass: ClassVar[VehicleClass] = VehicleClass.HV


@dataclass(kw_only=True)
class CavState(VehicleState):
    """A CAV with a replannable route.

    `claimed_by` holds the (bus id, edge index) of the trigger that last
    rerouted the CAV, together with the cursor at which the claim was
    made; the claim lapses once the CAV enters another edge.
    """

    vclass: ClassVar[VehicleClass] = VehicleClass.CAV

    claimed_by: Optional[Tuple[int, int]] = None
    claim_cursor: int = -2
    reroutes: int = 0

    def is_claimed(self) -> bool:
        return self.claimed_by is not None and self.claim_cursor == self.cursor

    def claim(self, bus_id: int, k: int) -> None:
        self.claimed_by = (bus_id, k)
        self.claim_cursor = self.cursor

    def replan(self, remaining: Route) -> None:
        """Replace the route after the current edge with `remaining`."""
        end = self.cursor + 1
        driven = Route(self.route.edges[:end], self.route.lane_choice[:end])
        self.route = driven.concat(remaining)
        self.reroutes += 1

    def remaining_route(self) -> Route:
        return self.route.suffix(self.cursor + 1)


@dataclass(kw_only=True)
class BusState(VehicleState):
    """A bus run on a fixed DL route.

    `schedule` maps stop nodes to absolute scheduled arrival times and
    `stop_edges` maps route indices to the stop served at the end of that
    edge. `stop_arrivals` collects actual arrival times as they happen.
    """

    vclass: ClassVar[VehicleClass] = VehicleClass.BUS

    line_id: str
    run: int
    schedule: Mapping[NodeId, int]
    stop_edges: Mapping[int, NodeId]
    stop_arrivals: Dict[NodeId, int] = field(default_factory=dict)
    dwell_remaining: int = 0
    estimated_next: Optional[float] = None

    @property
    def name(self) -> str:
        return f"{self.line_id}#{self.run}"

    def stop_on_current_edge(self) -> Optional[NodeId]:
        return self.stop_edges.get(self.cursor)


@dataclass(frozen=True)
class Timetable:
    """Stop offsets of one bus line and the departure time of each run."""

    line_id: str
    stops: Tuple[Tuple[NodeId, int], ...]
    departures: Tuple[int, ...]
    headway: int

    def __post_init__(self) -> None:
        for (_, previous), (node, offset) in zip(self.stops, self.stops[1:]):
            if offset <= previous:
                raise InvalidTimetable(
                    f"Line {self.line_id}: offset of stop {node} ({offset}) does not "
                    f"follow the previous stop ({previous})",
                    entity=node,
                )

    def offset(self, stop: NodeId) -> int:
        for node, offset in self.stops:
            if node == stop:
                return offset
        raise UnknownStop(f"Stop {stop} is not served by line {self.line_id}")

    def scheduled(self, run: int, stop: NodeId) -> int:
        return self.departures[run] + self.offset(stop)

    def schedule_for(self, run: int) -> Dict[NodeId, int]:
        return {node: self.departures[run] + offset for node, offset in self.stops}


@dataclass(frozen=True)
class SpawnRequest:
    """A vehicle to create this tick; routes are assigned by the policy."""

    vclass: VehicleClass
    origin: NodeId
    destination: NodeId


def propagate_arrival(vehicle: VehicleState, free_flow_time: float) -> float:
    """Free-flow arrival at the head of the current edge.

    Raises:
        ValueError: If the vehicle is not on an edge or the time is not
            positive
    """
    if free_flow_time <= 0:
        raise ValueError(f"Free-flow time must be positive, got {free_flow_time}")
    if vehicle.cursor < 0:
        raise ValueError(f"Vehicle {vehicle.id} has not entered an edge yet")
    return vehicle.entry_time + free_flow_time


def bus_estimate_next(
    bus: BusState, t_sys: int, net: RoadNetwork
) -> Tuple[float, Route]:
    """Estimated arrival at the end of the bus's current edge.

    Called when the bus enters an edge; stores the estimate on the bus
    and returns it with the route still ahead (current edge included).
    """
    if bus.cursor < 0:
        raise ValueError(f"Bus {bus.name} has not departed")
    if t_sys < bus.entry_time:
        raise ValueError(f"Bus {bus.name} entered its edge after {t_sys}")
    estimate = propagate_arrival(bus, net.edge(bus.route.edges[bus.cursor]).free_flow_time)
    bus.estimated_next = estimate
    return estimate, bus.route.suffix(bus.cursor)


def schedule_deviation(bus: BusState, stop: NodeId, actual: int) -> int:
    """Signed seconds between an actual and a scheduled stop arrival.

    Raises:
        UnknownStop: If the stop is not in the bus's timetable
    """
    if stop not in bus.schedule:
        raise UnknownStop(f"Stop {stop} is not served by bus {bus.name}")
    return actual - bus.schedule[stop]


def is_on_time(deviation: int, tolerance: int = 60) -> bool:
    return abs(deviation) <= tolerance


def _rate_per_tick(rate_per_min: float) -> Fraction:
    return Fraction(rate_per_min).limit_denominator(10**6) / 60


class DemandGenerator:
    """Seeded arrival process for the CAV and HV demand streams.

    Each class draws from its own child of the run seed, so changing
    one stream leaves the other's sequence intact.
    """

    def __init__(
        self,
        net: RoadNetwork,
        streams: Mapping[VehicleClass, DemandStream],
        seed: int,
        mode: str = "fixed-interval",
    ):
        if mode not in ("fixed-interval", "poisson"):
            raise ValueError(f"Unknown spawn mode: {mode}")
        self.mode = mode
        self._streams: List[Tuple[VehicleClass, Fraction, List[Tuple[NodeId, NodeId]]]] = []
        children = np.random.SeedSequence(seed).spawn(len(streams))
        self._rngs: Dict[VehicleClass, np.random.Generator] = {}
        for (vclass, stream), child in zip(streams.items(), children):
            pairs = [(net.node_id(o), net.node_id(d)) for o, d in stream.od_pairs]
            rate = _rate_per_tick(stream.rate_per_min)
            if rate > 0 and not pairs:
                raise ScenarioError(f"{vclass.value} demand has a rate but no OD pairs")
            self._streams.append((vclass, rate, pairs))
            self._rngs[vclass] = np.random.default_rng(child)

    def count(self, vclass: VehicleClass, rate: Fraction, t: int) -> int:
        if rate == 0:
            return 0
        if self.mode == "fixed-interval":
            return int((t + 1) * rate) - int(t * rate)
        return int(self._rngs[vclass].poisson(float(rate)))

    def spawn(self, t: int) -> List[SpawnRequest]:
        requests: List[SpawnRequest] = []
        for vclass, rate, pairs in self._streams:
            rng = self._rngs[vclass]
            for _ in range(self.count(vclass, rate, t)):
                origin, destination = pairs[int(rng.integers(len(pairs)))]
                requests.append(SpawnRequest(vclass, origin, destination))
        return requests


def spawn_demand(t: int, generator: DemandGenerator) -> List[SpawnRequest]:
    """Vehicles arriving at tick t, CAVs first, then HVs."""
    return generator.spawn(t)


def build_bus_route(net: RoadNetwork, line: BusLineSpec) -> Route:
    """Chain a bus line's node labels into a DL-only route.

    Raises:
        InvalidBusLine: If consecutive nodes are not joined by an edge with
            a JointDL lane
    """
    nodes = [net.node_id(label) for label in line.route]
    edges: List[int] = []
    for a, b in zip(nodes, nodes[1:]):
        candidates = [
            net.edge(e) for e in net.out_edges(a) if net.edge(e).to_node == b
        ]
        usable = [e for e in candidates if e.has_lane(LaneClass.JOINT_DL)]
        if not usable:
            raise InvalidBusLine(
                f"Line {line.id}: no dl edge from {net.label(a)} to {net.label(b)}",
                entity=line.id,
            )
        edges.append(usable[0].id)
    return Route(tuple(edges), tuple(LaneClass.JOINT_DL for _ in edges))


def build_timetable(
    net: RoadNetwork, line: BusLineSpec, route: Route
) -> Tuple[Timetable, Dict[int, NodeId]]:
    """Resolve a line's stops against its route.

    A stop is either a station on one of the route's edges or the route's
    final node. Returns the timetable and the route index at whose end
    each stop is served.

    Raises:
        InvalidTimetable: If a stop is not on the route, appears out of
            route order, or offsets do not strictly increase
    """
    stop_at: Dict[NodeId, int] = {}
    for index, edge_id in enumerate(route.edges):
        stop = net.edge(edge_id).bus_stop
        if stop is not None:
            stop_at[stop] = index
    final = net.edge(route.edges[-1]).to_node
    stop_at.setdefault(final, len(route) - 1)

    stops: List[Tuple[NodeId, int]] = []
    stop_edges: Dict[int, NodeId] = {}
    last_index = -1
    for spec in line.stops:
        node = net.node_id(spec.node)
        index = stop_at.get(node)
        if index is None:
            raise InvalidTimetable(
                f"Line {line.id}: stop {spec.node} is not on the route", entity=spec.node
            )
        if index <= last_index:
            raise InvalidTimetable(
                f"Line {line.id}: stop {spec.node} is out of route order", entity=spec.node
            )
        if stops and spec.offset <= stops[-1][1]:
            raise InvalidTimetable(
                f"Line {line.id}: offset of stop {spec.node} ({spec.offset}) does not "
                f"follow the previous stop ({stops[-1][1]})",
                entity=spec.node,
            )
        last_index = index
        stops.append((node, spec.offset))
        stop_edges[index] = node

    departures = tuple(line.first_departure + r * line.headway for r in range(line.runs))
    return Timetable(line.id, tuple(stops), departures, line.headway), stop_edges


def collect_bus_line_issues(doc: ScenarioDocument, net: RoadNetwork) -> List[ScenarioError]:
    """Validate every bus line and the demand OD pairs against a network."""
    issues: List[ScenarioError] = []
    seen: Dict[str, int] = {}
    for line in doc.bus_lines:
        seen[line.id] = seen.get(line.id, 0) + 1
        if seen[line.id] == 2:
            issues.append(InvalidBusLine(f"Bus line {line.id} is declared twice", entity=line.id))
        try:
            route = build_bus_route(net, line)
            build_timetable(net, line, route)
        except ScenarioError as e:
            issues.append(e)

    for name, stream in (("cav", doc.demand.cav), ("hv", doc.demand.hv)):
        for origin, destination in stream.od_pairs:
            for label in (origin, destination):
                try:
                    node = net.node_id(label)
                except ScenarioError as e:
                    issues.append(e)
                    continue
                if net.nodes[node].kind is not NodeKind.INTERSECTION:
                    issues.append(
                        ScenarioError(
                            f"{name} OD pair ({origin}, {destination}) uses station {label}",
                            entity=label,
                        )
                    )
        if stream.rate_per_min > 0 and not stream.od_pairs:
            issues.append(ScenarioError(f"{name} demand has a rate but no OD pairs", entity=name))
    return issues


def initial_bus_states(
    net: RoadNetwork, lines: Sequence[BusLineSpec], first_id: int = 0
) -> List[BusState]:
    """Create one BusState per scheduled run, ordered by departure."""
    buses: List[BusState] = []
    next_id = first_id
    for line in lines:
        route = build_bus_route(net, line)
        timetable, stop_edges = build_timetable(net, line, route)
        for run, departure in enumerate(timetable.departures):
            buses.append(
                BusState(
                    id=next_id,
                    origin=net.edge(route.edges[0]).from_node,
                    destination=net.edge(route.edges[-1]).to_node,
                    route=route,
                    spawn_time=departure,
                    line_id=line.id,
                    run=run,
                    schedule=timetable.schedule_for(run),
                    stop_edges=stop_edges,
                )
            )
            next_id += 1
    buses.sort(key=lambda b: (b.spawn_time, b.id))
    return buses
