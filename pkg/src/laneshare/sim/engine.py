"""
Discrete-time mesoscopic simulation engine.

The engine advances a 1 s clock. Each tick runs, in order:
1. Spawning of bus runs and CAV/HV demand (until the horizon)
2. Arrivals: edge exits, bus stop arrivals with dwell, trip completions
3. Policy evaluation, which commits any reroutes
4. Movement: vehicles at an intersection enter their next edge

A vehicle's traversal time is fixed when it enters an edge, from the
BPR function applied to the flow measured by the edge's start sensor
over the trailing window (DL or GPL half-width). Vehicles do not queue;
dwelling buses do not block CAVs on the shared lane. The time each
vehicle took to cross an edge is reported to the travel time log when it
reaches the edge end, before any dwell.

After the horizon no new demand is spawned and the engine keeps running
until the network empties or the drain limit is reached, so late bus
runs still reach their stops.
"""

from dataclasses import dataclass, field
import logging
import math
from typing import Dict, List, Optional, Tuple

from ..config.models import ScenarioDocument
from ..core.errors import SimulationAbort
from ..core.flowmodel import FlowModelParams, HvEntryLog, SensorLog, TravelTimeLog, bpr_time
from ..core.fleet import (
    BusState,
    CavState,
    DemandGenerator,
    HvState,
    VehicleState,
    bus_estimate_next,
    initial_bus_states,
    schedule_deviation,
    spawn_demand,
)
from ..core.network import PERMITTED_LANES, EdgeLane, NodeKind, RoadNetwork, VehicleClass
from ..routing.base import FleetSnapshot, RoutingPolicy
from .trace import EventTrace, TraceRecord

logger = logging.getLogger("laneshare.sim")


@dataclass
class SimClock:
    """Integer simulation clock."""

    t: int = 0
    tick: int = 1
    horizon: int = 3600

    def advance(self) -> int:
        self.t += self.tick
        return self.t

    @property
    def spawning(self) -> bool:
        return self.t < self.horizon


class EdgeOccupancy:
    """Vehicles currently on each edge-lane with their entry and exit times."""

    def __init__(self) -> None:
        self._lanes: Dict[EdgeLane, Dict[int, Tuple[int, int]]] = {}

    def enter(self, edge_lane: EdgeLane, vehicle: int, entry: int, exit_time: int) -> None:
        self._lanes.setdefault(edge_lane, {})[vehicle] = (entry, exit_time)

    def extend(self, edge_lane: EdgeLane, vehicle: int, exit_time: int) -> None:
        entry, _ = self._lanes[edge_lane][vehicle]
        self._lanes[edge_lane][vehicle] = (entry, exit_time)

    def leave(self, edge_lane: EdgeLane, vehicle: int, t: int) -> Tuple[int, int]:
        """Remove a vehicle whose exit time is due.

        Raises:
            SimulationAbort: If the vehicle is not on the edge-lane or is
                leaving before or after its exit time
        """
        entry, exit_time = self._lanes.get(edge_lane, {}).pop(vehicle, (None, None))
        if entry is None:
            raise SimulationAbort(f"Vehicle {vehicle} left edge {edge_lane[0]} it never entered")
        if exit_time != t:
            raise SimulationAbort(
                f"Vehicle {vehicle} left edge {edge_lane[0]} at t={t}, due at t={exit_time}"
            )
        return entry, exit_time

    def __len__(self) -> int:
        return sum(len(v) for v in self._lanes.values())


def realized_traversal_time(
    net: RoadNetwork,
    edge_lane: EdgeLane,
    t: int,
    sensors: SensorLog,
    flow_params: FlowModelParams,
) -> float:
    """Traversal time of a vehicle entering `edge_lane` at t.

    The flow is the count of prior entries in [t - window, t] divided by
    the window, where the window is the lane class's monitoring
    half-width. The entering vehicle must not have been recorded yet.
    """
    window = flow_params.half_width(edge_lane[1])
    lane = net.lane(edge_lane)
    flow = sensors.measured_flow(edge_lane, t, window)
    return bpr_time(lane.free_flow_time, flow, lane.capacity, flow_params.bpr)


def _leaving_after_dwell(vehicle: VehicleState) -> bool:
    if not isinstance(vehicle, BusState):
        return False
    stop = vehicle.stop_on_current_edge()
    return stop is not None and stop in vehicle.stop_arrivals


@dataclass
class RunStats:
    spawned: Dict[VehicleClass, int] = field(
        default_factory=lambda: {c: 0 for c in VehicleClass}
    )
    completed: Dict[VehicleClass, int] = field(
        default_factory=lambda: {c: 0 for c in VehicleClass}
    )

    @property
    def total_spawned(self) -> int:
        return sum(self.spawned.values())

    @property
    def total_completed(self) -> int:
        return sum(self.completed.values())


class Simulation:
    """One run of a scenario under one policy and seed.

    The loop is single-threaded; identical (scenario, policy, seed)
    inputs give an identical event trace.
    """

    def __init__(
        self,
        doc: ScenarioDocument,
        net: RoadNetwork,
        policy: RoutingPolicy,
        seed: int = 1,
        horizon: Optional[int] = None,
    ):
        self.doc = doc
        self.net = net
        self.policy = policy
        self.params = doc.params
        self.flow_params = FlowModelParams.from_scenario(doc.params)
        self.clock = SimClock(horizon=horizon if horizon is not None else doc.params.horizon)
        self.drain_until = self.clock.horizon + doc.params.drain_limit

        self.sensors = SensorLog()
        self.hv_log = HvEntryLog(self.sensors)
        self.travel_log = TravelTimeLog()
        self.occupancy = EdgeOccupancy()
        self.trace = EventTrace()
        self.stats = RunStats()

        self._pending_buses: List[BusState] = initial_bus_states(net, doc.bus_lines)
        self._next_id = len(self._pending_buses)
        self._demand = DemandGenerator(
            net,
            {VehicleClass.CAV: doc.demand.cav, VehicleClass.HV: doc.demand.hv},
            seed,
            doc.params.spawn_mode,
        )
        self.active: Dict[int, VehicleState] = {}
        self.finished: Dict[int, VehicleState] = {}

    @property
    def t(self) -> int:
        return self.clock.t

    def in_network(self) -> int:
        return len(self.active)

    def done(self) -> bool:
        if self.clock.spawning:
            return False
        if not self.active and not self._pending_buses:
            return True
        return self.t >= self.drain_until

    def snapshot(self) -> FleetSnapshot:
        cavs = [v for v in self.active.values() if isinstance(v, CavState)]
        buses = [v for v in self.active.values() if isinstance(v, BusState)]
        return FleetSnapshot(
            self.t,
            cavs,
            buses,
            self.sensors,
            self.hv_log,
            travel_log=self.travel_log,
            departures=tuple(self._pending_buses),
        )

    def _emit(self, kind: str, **fields: object) -> TraceRecord:
        return self.trace.append(self.t, kind, **fields)

    def _spawn(self, vehicle: VehicleState) -> None:
        self.active[vehicle.id] = vehicle
        self.stats.spawned[vehicle.vclass] += 1
        fields: Dict[str, object] = {
            "vehicle": vehicle.id,
            "class": vehicle.vclass.value,
            "origin": self.net.label(vehicle.origin),
            "destination": self.net.label(vehicle.destination),
            "route": list(vehicle.route.edges),
            "lanes": [lane.value for lane in vehicle.route.lane_choice],
        }
        if isinstance(vehicle, BusState):
            fields.update(
                line=vehicle.line_id,
                run=vehicle.run,
                stops=[
                    {
                        "stop": self.net.label(stop),
                        "scheduled": scheduled,
                        "station": self.net.nodes[stop].kind is NodeKind.BUS_STATION,
                    }
                    for stop, scheduled in vehicle.schedule.items()
                ],
            )
        self._emit("spawn", **fields)
        if not vehicle.route:
            self._complete(vehicle)

    def _spawn_phase(self) -> None:
        t = self.t
        while self._pending_buses and self._pending_buses[0].spawn_time <= t:
            self._spawn(self._pending_buses.pop(0))
        if not self.clock.spawning:
            return

        requests = spawn_demand(t, self._demand)
        for request in requests:
            vehicle_id = self._next_id
            self._next_id += 1
            vehicle: VehicleState
            if request.vclass is VehicleClass.CAV:
                route = self.policy.cav_route(
                    self.snapshot(), request.origin, request.destination
                )
                vehicle = CavState(
                    id=vehicle_id,
                    origin=request.origin,
                    destination=request.destination,
                    route=route,
                    spawn_time=t,
                )
            else:
                vehicle = HvState(
                    id=vehicle_id,
                    origin=request.origin,
                    destination=request.destination,
                    route=self.policy.hv_route(request.origin, request.destination),
                    spawn_time=t,
                )
            self._spawn(vehicle)

    def _complete(self, vehicle: VehicleState) -> None:
        vehicle.completed_time = self.t
        del self.active[vehicle.id]
        self.finished[vehicle.id] = vehicle
        self.stats.completed[vehicle.vclass] += 1
        free_flow = self.net.route_free_flow_time(vehicle.route)
        dwell_total = 0
        if isinstance(vehicle, BusState):
            dwell_total = self.params.dwell_time * sum(
                1 for stop in vehicle.stop_arrivals if stop != vehicle.destination
            )
        self._emit(
            "trip-complete",
            vehicle=vehicle.id,
            **{"class": vehicle.vclass.value},
            travel_time=vehicle.travel_time(),
            free_flow_time=free_flow,
            dwell=dwell_total,
            route=list(vehicle.route.edges),
            lanes=[lane.value for lane in vehicle.route.lane_choice],
        )

    def _stop_arrival(self, bus: BusState, stop: int) -> None:
        bus.stop_arrivals[stop] = self.t
        self._emit(
            "stop-arrival",
            vehicle=bus.id,
            line=bus.line_id,
            run=bus.run,
            stop=self.net.label(stop),
            scheduled=bus.schedule[stop],
            deviation=schedule_deviation(bus, stop, self.t),
        )

    def _arrival_phase(self) -> List[VehicleState]:
        """Process edge ends reached this tick; return vehicles ready to move."""
        movers: List[VehicleState] = []
        for vehicle in list(self.active.values()):
            if vehicle.cursor < 0:
                movers.append(vehicle)
                continue
            if vehicle.exit_time != self.t:
                continue
            step = vehicle.current_step()
            assert step is not None
            if not _leaving_after_dwell(vehicle):
                self.travel_log.record(step, self.t, self.t - vehicle.entry_time)

            if isinstance(vehicle, BusState):
                stop = vehicle.stop_on_current_edge()
                if stop is not None and stop not in vehicle.stop_arrivals:
                    self._stop_arrival(vehicle, stop)
                    if stop != vehicle.destination and self.params.dwell_time > 0:
                        vehicle.exit_time = self.t + self.params.dwell_time
                        self.occupancy.extend(step, vehicle.id, vehicle.exit_time)
                        self._emit(
                            "dwell",
                            vehicle=vehicle.id,
                            stop=self.net.label(stop),
                            duration=self.params.dwell_time,
                            until=vehicle.exit_time,
                        )
                        continue

            self.occupancy.leave(step, vehicle.id, self.t)
            self._emit(
                "edge-exit",
                vehicle=vehicle.id,
                **{"class": vehicle.vclass.value},
                edge=step[0],
                lane=step[1].value,
            )
            if vehicle.next_step() is None:
                self._complete(vehicle)
            else:
                movers.append(vehicle)
        return movers

    def _enter(self, vehicle: VehicleState) -> None:
        step = vehicle.next_step()
        if step is None:
            raise SimulationAbort(f"Vehicle {vehicle.id} has nowhere to go at t={self.t}")
        if step[1] not in PERMITTED_LANES[vehicle.vclass]:
            raise SimulationAbort(
                f"{vehicle.vclass.value} {vehicle.id} routed onto {step[1].value} lane "
                f"of edge {step[0]}"
            )
        if vehicle.cursor >= 0:
            previous = self.net.edge(vehicle.route.edges[vehicle.cursor])
            if self.net.edge(step[0]).from_node != previous.to_node:
                raise SimulationAbort(f"Route of vehicle {vehicle.id} breaks at edge {step[0]}")

        traversal = realized_traversal_time(self.net, step, self.t, self.sensors, self.flow_params)
        exit_time = self.t + math.ceil(traversal)
        if exit_time < self.t + self.net.edge(step[0]).free_flow_time:
            raise SimulationAbort(
                f"Vehicle {vehicle.id} would cross edge {step[0]} faster than free flow"
            )
        vehicle.enter(self.t, exit_time)
        self.sensors.record(step, vehicle.vclass, self.t)
        self.occupancy.enter(step, vehicle.id, self.t, exit_time)
        if isinstance(vehicle, BusState):
            bus_estimate_next(vehicle, self.t, self.net)
        self._emit(
            "edge-enter",
            vehicle=vehicle.id,
            **{"class": vehicle.vclass.value},
            edge=step[0],
            lane=step[1].value,
            traversal=traversal,
            exit=exit_time,
        )

    def step(self) -> List[TraceRecord]:
        """Advance the world by one tick and return the records it emitted."""
        first = len(self.trace)
        self._spawn_phase()
        movers = self._arrival_phase()

        for event in self.policy.evaluate(self.snapshot()):
            self.trace.append(event.time, event.kind, **event.fields)

        for vehicle in sorted(movers, key=lambda v: v.id):
            if vehicle.completed_time is None:
                self._enter(vehicle)

        if self.stats.total_spawned != self.stats.total_completed + len(self.active):
            raise SimulationAbort(
                f"Vehicle conservation broken at t={self.t}: spawned "
                f"{self.stats.total_spawned}, completed {self.stats.total_completed}, "
                f"in network {len(self.active)}"
            )
        on_edges = sum(1 for v in self.active.values() if v.cursor >= 0)
        if on_edges != len(self.occupancy):
            raise SimulationAbort(
                f"Edge occupancy broken at t={self.t}: {on_edges} vehicles on edges, "
                f"{len(self.occupancy)} tracked"
            )
        records = self.trace.since(first)
        self.clock.advance()
        return records

    def run(self) -> EventTrace:
        logger.info(
            f"Running '{self.doc.name}' with {self.policy.policy.value} "
            f"(horizon {self.clock.horizon}s)"
        )
        while not self.done():
            self.step()
        if self.active:
            logger.warning(
                f"Run ended at t={self.t} with {len(self.active)} vehicles still in the network"
            )
        logger.info(
            f"Finished at t={self.t}: {self.stats.total_completed}/{self.stats.total_spawned} "
            f"trips completed, {len(self.trace)} events"
        )
        return self.trace


def run_simulation(
    doc: ScenarioDocument,
    net: RoadNetwork,
    policy: RoutingPolicy,
    seed: int = 1,
    horizon: Optional[int] = None,
) -> EventTrace:
    """Run a scenario to completion and return its event trace."""
    return Simulation(doc, net, policy, seed, horizon).run()
