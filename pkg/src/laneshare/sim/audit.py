"""
Post-hoc audit of an event trace.

Re-checks the run invariants from the trace records alone (plus the road
network for edge endpoints and lanes):
- ordering: records sorted by (time, sequence number)
- conservation: every vehicle spawns once and completes at most once,
  with no activity outside its lifetime
- route chaining and class legality of every edge entry
- edge timing: exit fixed at entry from the traversal time, never
  earlier than free flow, and edges left exactly when due
- bus immutability: buses drive their spawn route and are never rerouted
- exclusion soundness and window membership of coordinated reroutes
- one-shot triggering per (bus, k)
- sensor consistency, when the run's sensor log is supplied
"""

from collections import Counter
from dataclasses import dataclass, field
import math
from typing import Dict, Iterable, List, Optional, Set, Tuple, Union

from ..core.flowmodel import SensorLog
from ..core.network import PERMITTED_LANES, LaneClass, RoadNetwork, VehicleClass
from .trace import EventTrace, TraceRecord


@dataclass
class AuditReport:
    records: int = 0
    spawned: int = 0
    completed: int = 0
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def in_network(self) -> int:
        return self.spawned - self.completed

    def add(self, record: Optional[TraceRecord], message: str) -> None:
        where = f"t={record.time} seq={record.seq}: " if record is not None else ""
        self.violations.append(where + message)


@dataclass
class _Vehicle:
    vclass: VehicleClass
    spawn_route: Tuple[int, ...]
    driven: List[int] = field(default_factory=list)
    lanes: List[str] = field(default_factory=list)
    exit_due: Optional[int] = None
    completed: bool = False


def audit_trace(
    trace: Union[EventTrace, Iterable[TraceRecord]],
    net: RoadNetwork,
    delta_t_dl: int = 30,
    sensors: Optional[SensorLog] = None,
) -> AuditReport:
    """Check a trace against the run invariants.

    Args:
        trace: Records of one run, in emission order
        net: The network the run used
        delta_t_dl: DL monitoring half-width used by the run
        sensors: The run's sensor log, for the sensor consistency check

    Returns:
        AuditReport listing every violation found
    """
    report = AuditReport()
    vehicles: Dict[int, _Vehicle] = {}
    fired: Set[Tuple[int, int]] = set()
    entries: Counter = Counter()
    previous: Optional[Tuple[int, int]] = None

    for record in trace:
        report.records += 1
        key = (record.time, record.seq)
        if previous is not None and key <= previous:
            report.add(record, f"out of order after t={previous[0]} seq={previous[1]}")
        previous = key

        if record.kind == "spawn":
            vid = record["vehicle"]
            if vid in vehicles:
                report.add(record, f"vehicle {vid} spawned twice")
                continue
            vehicles[vid] = _Vehicle(VehicleClass(record["class"]), tuple(record["route"]))
            continue

        if record.kind in ("edge-enter", "edge-exit", "stop-arrival", "dwell", "trip-complete"):
            vid = record["vehicle"]
            vehicle = vehicles.get(vid)
            if vehicle is None:
                report.add(record, f"{record.kind} for vehicle {vid} before its spawn")
                continue
            if vehicle.completed:
                report.add(record, f"{record.kind} for vehicle {vid} after its trip completed")

            if record.kind == "edge-enter":
                _check_entry(report, record, vehicle, net)
                entries[(record["edge"], record["lane"], vehicle.vclass)] += 1
            elif record.kind == "dwell":
                vehicle.exit_due = record["until"]
            elif record.kind == "edge-exit":
                if vehicle.exit_due is not None and record.time != vehicle.exit_due:
                    report.add(
                        record,
                        f"vehicle {vid} left edge {record['edge']} due at t={vehicle.exit_due}",
                    )
                vehicle.exit_due = None
            elif record.kind == "trip-complete":
                vehicle.completed = True
                if tuple(record["route"]) != tuple(vehicle.driven):
                    report.add(record, f"vehicle {vid} completed a route it did not drive")
                elif list(record["lanes"]) != vehicle.lanes:
                    report.add(record, f"vehicle {vid} completed on lanes it did not drive")
                bus = vehicle.vclass is VehicleClass.BUS
                if bus and tuple(vehicle.driven) != vehicle.spawn_route:
                    report.add(record, f"bus {vid} left its fixed route")

        elif record.kind == "trigger":
            pair = (record["bus"], record["k"])
            if pair in fired:
                report.add(record, f"bus {pair[0]} triggered twice for edge index {pair[1]}")
            fired.add(pair)

        elif record.kind == "reroute":
            _check_reroute(report, record, vehicles, delta_t_dl)

    report.spawned = len(vehicles)
    report.completed = sum(1 for v in vehicles.values() if v.completed)

    if sensors is not None:
        _check_sensors(report, entries, sensors)
    return report


def _check_entry(
    report: AuditReport, record: TraceRecord, vehicle: _Vehicle, net: RoadNetwork
) -> None:
    edge_id = record["edge"]
    lane = LaneClass(record["lane"])
    if not net.has_edge(edge_id):
        report.add(record, f"unknown edge {edge_id}")
        return
    edge = net.edge(edge_id)
    exit_time = record.get("exit")
    if exit_time is not None:
        if exit_time != record.time + math.ceil(record["traversal"]):
            report.add(record, f"exit of vehicle {record['vehicle']} disagrees with traversal")
        if exit_time < record.time + edge.free_flow_time:
            report.add(
                record,
                f"vehicle {record['vehicle']} crosses edge {edge_id} faster than free flow",
            )
        vehicle.exit_due = exit_time
    if not edge.has_lane(lane):
        report.add(record, f"edge {edge_id} has no {lane.value} lane")
    if lane not in PERMITTED_LANES[vehicle.vclass]:
        report.add(record, f"{vehicle.vclass.value} {record['vehicle']} on {lane.value} lane")
    if vehicle.driven:
        tail = net.edge(vehicle.driven[-1]).to_node
        if edge.from_node != tail:
            report.add(record, f"route of vehicle {record['vehicle']} breaks at edge {edge_id}")
    vehicle.driven.append(edge_id)
    vehicle.lanes.append(lane.value)


def _check_reroute(
    report: AuditReport,
    record: TraceRecord,
    vehicles: Dict[int, _Vehicle],
    delta_t_dl: int,
) -> None:
    if "assignments" not in record.fields:
        vid = record["vehicle"]
        if vid in vehicles and vehicles[vid].vclass is not VehicleClass.CAV:
            report.add(record, f"non-CAV vehicle {vid} rerouted")
        return

    excluded = (record["excluded_edge"], record["excluded_lane"])
    for assignment in record["assignments"]:
        vid = assignment["vehicle"]
        if vid in vehicles and vehicles[vid].vclass is not VehicleClass.CAV:
            report.add(record, f"non-CAV vehicle {vid} rerouted")
        if excluded in zip(assignment["route"], assignment["lanes"]):
            report.add(record, f"vehicle {vid} assigned the excluded lane {excluded}")
        if abs(assignment["entry"] - record.time) > delta_t_dl:
            report.add(record, f"vehicle {vid} rerouted outside the monitoring window")


def _check_sensors(report: AuditReport, entries: Counter, sensors: SensorLog) -> None:
    logged: Counter = Counter()
    for (edge_id, lane_name, vclass) in entries:
        lane = (edge_id, LaneClass(lane_name))
        logged[(edge_id, lane_name, vclass)] = len(sensors.entries(lane).get(vclass, []))
    for key, count in entries.items():
        if logged[key] != count:
            report.add(
                None,
                f"edge {key[0]} {key[1]} lane: {count} {key[2].value} entries traced, "
                f"{logged[key]} in the sensor log",
            )
    if sum(entries.values()) != sensors.total():
        report.add(None, "sensor log holds entries that are not in the trace")
