"""
Coordinated CAV rerouting around buses on the joint dedicated lane.

While a bus travels toward intersection k, the anticipated travel time
of its next DL edge is checked every tick. When it reaches (1 + lambda)
times the free-flow time, the CAVs expected to enter that DL edge within
the monitoring window are rerouted from intersection k, with the
congested DL lane excluded. CAVs are assigned one after another in order
of anticipated entry time, each seeing the flows left by the previous
assignments.

A fired trigger also places a hold on the DL edge: from one DL
half-width before the bus is due at the edge until the bus enters it,
the lane is left out of every CAV route the policy plans. A bus about to
be dispatched holds the DL of its first edge the same way. Between
triggers, each CAV re-plans at every intersection on anticipated times.

Trigger bookkeeping:
- Each (bus, k) fires at most once
- A CAV claimed by one trigger is skipped by others, and by intersection
  re-planning, until it enters its next edge
- A CAV with no alternative keeps its route and is reported as such
"""

from dataclasses import dataclass, field
import math
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Sequence, Set, Tuple

from ..core.errors import NoFeasiblePath
from ..core.flowmodel import (
    AnticipatedTravelTimes,
    FlowModelParams,
    MonitorWindow,
    anticipated_dl_flow,
    anticipated_edge_time,
    cav_entry_indicator,
)
from ..core.fleet import BusState, CavState, propagate_arrival
from ..core.network import EdgeLane, LaneClass, NodeId, RoadNetwork, Route, VehicleClass
from .base import FleetSnapshot, Policy, PolicyEvent, RoutingPolicy
from .dijkstra import prediction_aware_shortest_path, route_cost


@dataclass
class TriggerConfig:
    """Trigger tolerance and the set of (bus id, k) pairs already fired."""

    lambda_: float = 0.1
    fired: Set[Tuple[int, int]] = field(default_factory=set)

    def __post_init__(self) -> None:
        if not math.isfinite(self.lambda_) or self.lambda_ <= 0:
            raise ValueError(f"lambda must be a positive number, got {self.lambda_}")

    def threshold(self, free_flow_time: float) -> float:
        return (1.0 + self.lambda_) * free_flow_time

    def has_fired(self, bus_id: int, k: int) -> bool:
        return (bus_id, k) in self.fired

    def mark(self, bus_id: int, k: int) -> None:
        self.fired.add((bus_id, k))


@dataclass(frozen=True)
class Trigger:
    bus_id: int
    k: int
    time: int
    edge_id: int
    node: NodeId
    anticipated_flow: float
    anticipated_time: float
    free_flow_time: float

    @property
    def target(self) -> EdgeLane:
        return (self.edge_id, LaneClass.JOINT_DL)


@dataclass(frozen=True)
class LaneHold:
    """A DL edge kept off planned CAV routes until bus `bus_id` enters it.

    `k` is the edge's index on the bus route; the hold applies from
    `active_from` on.
    """

    bus_id: int
    k: int
    target: EdgeLane
    active_from: float

    def active(self, t: int) -> bool:
        return t >= self.active_from


def expected_entry(bus: BusState, dwell_time: int) -> float:
    """When a bus should enter its next edge, counting a dwell still ahead."""
    if bus.cursor < 0:
        return bus.spawn_time
    stop = bus.stop_on_current_edge()
    if stop is not None and stop not in bus.stop_arrivals and stop != bus.destination:
        return bus.exit_time + dwell_time
    return bus.exit_time


@dataclass(frozen=True)
class Assignment:
    vehicle: int
    route: Route
    entry_time: float
    cost: float


@dataclass(frozen=True)
class RerouteEvent:
    """Outcome of one trigger: who was rerouted, and onto what."""

    bus_id: int
    k: int
    time: int
    excluded_edge: int
    rerouted: Tuple[int, ...]
    assignments: Tuple[Assignment, ...]
    kept_original: Tuple[int, ...] = ()
    skipped_claimed: Tuple[int, ...] = ()
    excluded_lane: LaneClass = LaneClass.JOINT_DL

    def routes(self) -> Dict[int, Route]:
        return {a.vehicle: a.route for a in self.assignments}

    def to_fields(self) -> Dict[str, Any]:
        return {
            "policy": Policy.COORDINATED.value,
            "bus": self.bus_id,
            "k": self.k,
            "excluded_edge": self.excluded_edge,
            "excluded_lane": self.excluded_lane.value,
            "members": list(self.rerouted),
            "assignments": [
                {
                    "vehicle": a.vehicle,
                    "route": list(a.route.edges),
                    "lanes": [lane.value for lane in a.route.lane_choice],
                    "entry": a.entry_time,
                    "cost": a.cost,
                }
                for a in self.assignments
            ],
            "kept_original": list(self.kept_original),
            "skipped_claimed": list(self.skipped_claimed),
        }


def detect_trigger(
    bus: BusState,
    snapshot: FleetSnapshot,
    net: RoadNetwork,
    config: TriggerConfig,
    flow_params: FlowModelParams,
) -> Optional[Trigger]:
    """Check the trigger condition for a bus at the snapshot's tick.

    The control horizon runs from the bus's entry onto its current edge
    to the estimated arrival at the edge's end. Inside it, the next DL
    edge is checked against (1 + lambda) times its free-flow time. A
    firing is recorded in `config`, so each (bus, k) fires once.
    """
    if not bus.on_edge:
        return None
    k = bus.cursor + 1
    if k >= len(bus.route) or config.has_fired(bus.id, k):
        return None

    t = snapshot.t
    horizon_end = bus.estimated_next
    if horizon_end is None:
        horizon_end = propagate_arrival(bus, net.edge(bus.route.edges[bus.cursor]).free_flow_time)
    if not (bus.entry_time <= t <= horizon_end):
        return None

    edge_id = bus.route.edges[k]
    window = MonitorWindow(t, flow_params.delta_t_dl)
    flow = anticipated_dl_flow(snapshot.cavs, window, edge_id, net)
    estimate = anticipated_edge_time(net, (edge_id, LaneClass.JOINT_DL), flow, flow_params.bpr, t)
    free_flow_time = net.edge(edge_id).free_flow_time
    if estimate.anticipated_time < config.threshold(free_flow_time):
        return None

    config.mark(bus.id, k)
    return Trigger(
        bus_id=bus.id,
        k=k,
        time=t,
        edge_id=edge_id,
        node=net.edge(edge_id).from_node,
        anticipated_flow=flow,
        anticipated_time=estimate.anticipated_time,
        free_flow_time=free_flow_time,
    )


def identify_reroute_set(
    trigger: Trigger,
    cavs: Sequence[CavState],
    net: RoadNetwork,
    flow_params: FlowModelParams,
) -> List[int]:
    """Ids of the CAVs anticipated to enter the congested DL edge.

    Ordered by anticipated entry time, then id.
    """
    window = MonitorWindow(trigger.time, flow_params.delta_t_dl)
    members = [cav for cav in cavs if cav_entry_indicator(cav, window, trigger.target, net)]
    members.sort(key=lambda cav: (cav.next_entry_time(net), cav.id))
    return [cav.id for cav in members]


def reoptimize_set(
    trigger: Trigger,
    reroute_set: Sequence[int],
    snapshot: FleetSnapshot,
    net: RoadNetwork,
    flow_params: FlowModelParams,
    held: FrozenSet[EdgeLane] = frozenset(),
) -> RerouteEvent:
    """Assign new routes from intersection k to the reroute set.

    CAVs are taken in the order given (anticipated entry time); each gets
    the cheapest route under anticipated times with the congested DL lane
    and any `held` lanes excluded, and its anticipated entry is then
    moved from the old next lane to the new one. Claimed CAVs are
    skipped; CAVs without an alternative keep their route.
    """
    by_id: Mapping[int, CavState] = {cav.id: cav for cav in snapshot.cavs}
    times = AnticipatedTravelTimes(net, flow_params, trigger.time, snapshot.cavs, snapshot.hv_log)
    excluded_lanes = held | {trigger.target}

    assignments: List[Assignment] = []
    kept: List[int] = []
    skipped: List[int] = []
    for cav_id in reroute_set:
        cav = by_id[cav_id]
        if cav.is_claimed():
            skipped.append(cav_id)
            continue
        try:
            route = prediction_aware_shortest_path(
                net,
                times.costs(),
                cav.head_node(net),
                cav.destination,
                VehicleClass.CAV,
                excluded_lanes=excluded_lanes,
            )
        except NoFeasiblePath:
            kept.append(cav_id)
            continue
        entry = cav.next_entry_time(net)
        cost = route_cost(route, times.costs())
        times.move(entry, cav.next_step(), route.step(0) if route else None)
        assignments.append(Assignment(cav_id, route, entry, cost))

    return RerouteEvent(
        bus_id=trigger.bus_id,
        k=trigger.k,
        time=trigger.time,
        excluded_edge=trigger.edge_id,
        rerouted=tuple(reroute_set),
        assignments=tuple(assignments),
        kept_original=tuple(kept),
        skipped_claimed=tuple(skipped),
    )


def apply_reroute(event: RerouteEvent, cavs: Sequence[CavState]) -> None:
    """Commit a reroute: replace routes and claim the CAVs for the trigger."""
    routes = event.routes()
    for cav in cavs:
        route = routes.get(cav.id)
        if route is not None:
            cav.replan(route)
            cav.claim(event.bus_id, event.k)


class CoordinatedPolicy(RoutingPolicy):
    """Bus-aware coordinated CAV routing on anticipated travel times."""

    policy = Policy.COORDINATED

    def __init__(self, *args: Any, **kwargs: Any):
        super().__init__(*args, **kwargs)
        self.triggers = TriggerConfig(self.params.lambda_)
        self.holds: Dict[Tuple[int, int], LaneHold] = {}
        self._spawn_times: Optional[AnticipatedTravelTimes] = None

    def held_lanes(self, snapshot: FleetSnapshot) -> FrozenSet[EdgeLane]:
        """DL edges currently kept clear for approaching buses."""
        self._refresh_holds(snapshot)
        return frozenset(h.target for h in self.holds.values() if h.active(snapshot.t))

    def _refresh_holds(self, snapshot: FleetSnapshot) -> None:
        lead = self.flow_params.delta_t_dl
        buses = {bus.id: bus for bus in snapshot.buses}
        for key, hold in list(self.holds.items()):
            bus = buses.get(hold.bus_id)
            if bus is None or bus.cursor >= hold.k:
                if bus is not None:
                    self.logger.debug(f"Bus {bus.name} entered edge {hold.target[0]}, hold lifted")
                del self.holds[key]
            else:
                active_from = expected_entry(bus, self.params.dwell_time) - lead
                self.holds[key] = LaneHold(hold.bus_id, hold.k, hold.target, active_from)

        for bus in snapshot.departures:
            if bus.spawn_time - lead > snapshot.t:
                break
            first = bus.route.step(0)
            if first[1] is LaneClass.JOINT_DL and (bus.id, 0) not in self.holds:
                self.holds[(bus.id, 0)] = LaneHold(bus.id, 0, first, bus.spawn_time - lead)

    def _hold(self, bus: BusState, trigger: Trigger) -> None:
        active_from = expected_entry(bus, self.params.dwell_time) - self.flow_params.delta_t_dl
        self.holds[(bus.id, trigger.k)] = LaneHold(bus.id, trigger.k, trigger.target, active_from)

    def _plan(
        self,
        costs: Mapping[EdgeLane, float],
        origin: NodeId,
        destination: NodeId,
        held: FrozenSet[EdgeLane],
    ) -> Route:
        try:
            return prediction_aware_shortest_path(
                self.net, costs, origin, destination, VehicleClass.CAV, excluded_lanes=held
            )
        except NoFeasiblePath:
            if not held:
                raise
            return prediction_aware_shortest_path(
                self.net, costs, origin, destination, VehicleClass.CAV
            )

    def cav_route(self, snapshot: FleetSnapshot, origin: NodeId, destination: NodeId) -> Route:
        times = self._spawn_times
        if times is None or times.t_sys != snapshot.t:
            times = AnticipatedTravelTimes(
                self.net, self.flow_params, snapshot.t, snapshot.cavs, snapshot.hv_log
            )
            self._spawn_times = times
        route = self._plan(times.costs(), origin, destination, self.held_lanes(snapshot))
        if route:
            times.move(snapshot.t, None, route.step(0))
        return route

    def replan_at_intersections(
        self, snapshot: FleetSnapshot, held: FrozenSet[EdgeLane]
    ) -> List[PolicyEvent]:
        """Re-plan every unclaimed CAV reaching an intersection this tick.

        A CAV keeps its route unless another one is strictly cheaper under
        anticipated times, or its next lane is held. Each CAV's own
        anticipated entry is taken out before it plans and put back on the
        lane it picks.
        """
        approaching = [
            cav
            for cav in snapshot.cavs
            if cav.on_edge
            and cav.exit_time == snapshot.t
            and cav.next_step() is not None
            and not cav.is_claimed()
        ]
        if not approaching:
            return []

        times = AnticipatedTravelTimes(
            self.net, self.flow_params, snapshot.t, snapshot.cavs, snapshot.hv_log
        )
        events: List[PolicyEvent] = []
        for cav in sorted(approaching, key=lambda c: c.id):
            entry = cav.next_entry_time(self.net)
            current = cav.remaining_route()
            times.move(entry, current.step(0), None)
            node = cav.head_node(self.net)
            try:
                best = self._plan(times.costs(), node, cav.destination, held)
            except NoFeasiblePath:
                best = current
            old_cost = route_cost(current, times.costs())
            new_cost = route_cost(best, times.costs())
            if best == current or (new_cost >= old_cost and current.step(0) not in held):
                times.move(entry, None, current.step(0))
                continue

            cav.replan(best)
            times.move(entry, None, best.step(0))
            self.logger.debug(
                f"CAV {cav.id} re-plans at node {self.net.label(node)}: "
                f"{old_cost:.1f}s -> {new_cost:.1f}s"
            )
            events.append(
                PolicyEvent(
                    kind="reroute",
                    time=snapshot.t,
                    fields={
                        "policy": self.policy.value,
                        "vehicle": cav.id,
                        "node": self.net.label(node),
                        "old_route": list(current.edges),
                        "route": list(best.edges),
                        "lanes": [lane.value for lane in best.lane_choice],
                        "old_cost": old_cost,
                        "cost": new_cost,
                    },
                )
            )
        return events

    def evaluate(self, snapshot: FleetSnapshot) -> List[PolicyEvent]:
        events: List[PolicyEvent] = []
        held = self.held_lanes(snapshot)
        for bus in sorted(snapshot.buses, key=lambda b: b.id):
            trigger = detect_trigger(bus, snapshot, self.net, self.triggers, self.flow_params)
            if trigger is None:
                continue
            self.logger.info(
                f"Bus {bus.name} trigger at t={trigger.time} for edge {trigger.edge_id}: "
                f"{trigger.anticipated_time:.1f}s >= "
                f"{self.triggers.threshold(trigger.free_flow_time):.1f}s"
            )
            events.append(
                PolicyEvent(
                    kind="trigger",
                    time=trigger.time,
                    fields={
                        "bus": bus.id,
                        "line": bus.line_id,
                        "run": bus.run,
                        "k": trigger.k,
                        "edge": trigger.edge_id,
                        "node": self.net.label(trigger.node),
                        "flow": trigger.anticipated_flow,
                        "anticipated_time": trigger.anticipated_time,
                        "free_flow_time": trigger.free_flow_time,
                    },
                )
            )

            members = identify_reroute_set(trigger, snapshot.cavs, self.net, self.flow_params)
            event = reoptimize_set(
                trigger, members, snapshot, self.net, self.flow_params, held=held
            )
            for cav_id in event.skipped_claimed:
                self.logger.debug(f"CAV {cav_id} already claimed, skipped by bus {bus.name}")
            for cav_id in event.kept_original:
                self.logger.warning(
                    f"No alternative for CAV {cav_id} at node {self.net.label(trigger.node)}; "
                    f"keeping its route"
                )
            apply_reroute(event, snapshot.cavs)
            events.append(PolicyEvent(kind="reroute", time=trigger.time, fields=event.to_fields()))
            self._hold(bus, trigger)
            held = self.held_lanes(snapshot)

        events.extend(self.replan_at_intersections(snapshot, held))
        return events
