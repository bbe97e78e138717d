"""
Traffic flow model for laneshare.

This module turns sensor observations and CAV route plans into travel
time estimates:
- BPR volume-delay evaluation
- Symmetric monitoring windows around the system time
- The CAV entry indicator and the anticipated DL/GPL flows built on it
- Per-lane travel time tables (anticipated, experienced, free-flow) used
  as routing costs

Anticipated flows count the CAVs expected to enter an edge-lane within
the window, based on free-flow propagation to the end of their current
edge. GPL estimates add the monitored HV increase, extrapolated from the
past half of the window.

All functions are pure over their inputs; SensorLog and TravelTimeLog
are written only by the simulation loop.
"""

from bisect import bisect_left, bisect_right
from collections import Counter
from dataclasses import dataclass
import math
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

from ..config.models import ScenarioParams
from .errors import NonPositiveCapacity, NotAGplEdge
from .fleet import CavState
from .network import EdgeLane, LaneClass, RoadNetwork, VehicleClass


@dataclass(frozen=True)
class BprParams:
    alpha: float = 0.15
    beta: float = 4.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("BPR parameters must be finite")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.beta < 1:
            raise ValueError(f"beta must be >= 1, got {self.beta}")


@dataclass(frozen=True)
class MonitorWindow:
    """Closed window [center - half_width, center + half_width] in seconds."""

    center: int
    half_width: int

    def __post_init__(self) -> None:
        if self.half_width < 1:
            raise ValueError(f"Window half-width must be >= 1, got {self.half_width}")

    @property
    def start(self) -> int:
        return self.center - self.half_width

    @property
    def end(self) -> int:
        return self.center + self.half_width


@dataclass(frozen=True)
class FlowModelParams:
    """BPR calibration plus the DL and GPL monitoring half-widths."""

    bpr: BprParams = BprParams()
    delta_t_dl: int = 30
    delta_t_gpl: int = 60

    @classmethod
    def from_scenario(cls, params: ScenarioParams) -> "FlowModelParams":
        return cls(
            bpr=BprParams(alpha=params.alpha, beta=params.beta),
            delta_t_dl=params.delta_t_dl,
            delta_t_gpl=params.delta_t_gpl,
        )

    def half_width(self, lane_class: LaneClass) -> int:
        return self.delta_t_dl if lane_class is LaneClass.JOINT_DL else self.delta_t_gpl


@dataclass(frozen=True)
class FlowEstimate:
    edge_id: int
    lane_class: LaneClass
    anticipated_flow: float
    anticipated_time: float
    computed_at: int


def bpr_time(tau0: float, flow: float, capacity: float, params: BprParams) -> float:
    """Travel time on a lane under the BPR volume-delay function.

    Args:
        tau0: Free-flow traversal time (s), > 0
        flow: Flow on the lane (veh/s), >= 0
        capacity: Effective lane capacity (veh/s)
        params: Congestion sensitivity parameters

    Returns:
        tau0 * (1 + alpha * (flow / capacity) ** beta)

    Raises:
        NonPositiveCapacity: If capacity <= 0
    """
    if capacity <= 0:
        raise NonPositiveCapacity(f"Capacity must be positive, got {capacity}")
    if flow <= 0:
        return tau0
    return tau0 * (1.0 + params.alpha * (flow / capacity) ** params.beta)


def in_window(t: float, window: MonitorWindow) -> bool:
    return abs(t - window.center) <= window.half_width


def cav_entry_indicator(
    cav: CavState, window: MonitorWindow, target: EdgeLane, net: RoadNetwork
) -> int:
    """1 if the CAV will enter `target` next, inside the window; else 0."""
    if cav.next_step() != target:
        return 0
    return 1 if in_window(cav.next_entry_time(net), window) else 0


def count_anticipated_entries(
    cavs: Iterable[CavState],
    window: MonitorWindow,
    net: RoadNetwork,
    lane_class: Optional[LaneClass] = None,
) -> Counter:
    """Count, per edge-lane, the CAVs expected to enter it inside the window.

    A single pass over the fleet; each CAV contributes to at most one
    edge-lane (its next step). Restricting `lane_class` keeps only
    entries onto lanes of that class.
    """
    counts: Counter = Counter()
    for cav in cavs:
        step = cav.next_step()
        if step is None or (lane_class is not None and step[1] is not lane_class):
            continue
        if in_window(cav.next_entry_time(net), window):
            counts[step] += 1
    return counts


def anticipated_dl_flow(
    cavs: Iterable[CavState], window: MonitorWindow, edge_id: int, net: RoadNetwork
) -> float:
    """Anticipated CAV flow (veh/s) onto the joint DL of an edge."""
    target = (edge_id, LaneClass.JOINT_DL)
    total = sum(cav_entry_indicator(cav, window, target, net) for cav in cavs)
    return total / (2 * window.half_width)


def anticipated_gpl_flow(
    cavs: Iterable[CavState],
    hv_log: "HvEntryLog",
    window: MonitorWindow,
    edge_id: int,
    net: RoadNetwork,
) -> float:
    """Anticipated flow (veh/s) onto the GPL of an edge: CAVs plus HVs.

    Raises:
        NotAGplEdge: If the edge has no general-purpose lane
    """
    if not net.edge(edge_id).has_lane(LaneClass.GPL):
        raise NotAGplEdge(f"Edge {edge_id} has no gpl lane")
    target = (edge_id, LaneClass.GPL)
    total = sum(cav_entry_indicator(cav, window, target, net) for cav in cavs)
    total += hv_log.delta_n(edge_id, window)
    return total / (2 * window.half_width)


def anticipated_edge_time(
    net: RoadNetwork,
    edge_lane: EdgeLane,
    flow: float,
    params: BprParams,
    computed_at: int = 0,
) -> FlowEstimate:
    """Evaluate BPR on an anticipated flow and record it as a FlowEstimate."""
    lane = net.lane(edge_lane)
    time = bpr_time(lane.free_flow_time, flow, lane.capacity, params)
    return FlowEstimate(edge_lane[0], edge_lane[1], flow, time, computed_at)


class SensorLog:
    """Entry timestamps seen by the sensor at the start of each edge-lane.

    Timestamps are kept per vehicle class in nondecreasing order, so
    window counts are two binary searches.
    """

    def __init__(self) -> None:
        self._entries: Dict[EdgeLane, Dict[VehicleClass, List[int]]] = {}

    def record(self, edge_lane: EdgeLane, vclass: VehicleClass, t: int) -> None:
        times = self._entries.setdefault(edge_lane, {}).setdefault(vclass, [])
        if times and t < times[-1]:
            raise ValueError(
                f"Sensor entries on {edge_lane} must be nondecreasing ({t} < {times[-1]})"
            )
        times.append(t)

    def count(
        self,
        edge_lane: EdgeLane,
        start: int,
        end: int,
        classes: Optional[Sequence[VehicleClass]] = None,
    ) -> int:
        """Entries with start <= t <= end, optionally for some classes only."""
        by_class = self._entries.get(edge_lane)
        if not by_class:
            return 0
        total = 0
        for vclass, times in by_class.items():
            if classes is None or vclass in classes:
                total += bisect_right(times, end) - bisect_left(times, start)
        return total

    def entries(self, edge_lane: EdgeLane) -> Dict[VehicleClass, List[int]]:
        return {c: list(t) for c, t in self._entries.get(edge_lane, {}).items()}

    def total(self) -> int:
        return sum(len(t) for by_class in self._entries.values() for t in by_class.values())

    def measured_flow(self, edge_lane: EdgeLane, t: int, window: int) -> float:
        """Flow (veh/s) over the trailing window [t - window, t]."""
        return self.count(edge_lane, t - window, t) / window


class HvEntryLog:
    """HV entries at the GPL start sensor of each edge.

    Backed by a SensorLog so the engine records every entry once; a
    standalone log is created when none is given.
    """

    def __init__(self, sensors: Optional[SensorLog] = None):
        self.sensors = sensors if sensors is not None else SensorLog()

    def record(self, edge_id: int, t: int) -> None:
        self.sensors.record((edge_id, LaneClass.GPL), VehicleClass.HV, t)

    def count(self, edge_id: int, start: int, end: int) -> int:
        return self.sensors.count((edge_id, LaneClass.GPL), start, end, (VehicleClass.HV,))

    def delta_n(self, edge_id: int, window: MonitorWindow) -> int:
        """HV increase over the whole window: twice the past half's count."""
        return 2 * self.count(edge_id, window.start, window.center)


class AnticipatedTravelTimes:
    """Anticipated travel time of every edge-lane at one instant.

    DL lanes use the CAV indicator count over the DL window; GPL lanes add
    the HV increase over the GPL window. Counts can be moved when a CAV's
    next step changes, so sequential route assignment sees earlier
    decisions.
    """

    def __init__(
        self,
        net: RoadNetwork,
        params: FlowModelParams,
        t_sys: int,
        cavs: Iterable[CavState],
        hv_log: HvEntryLog,
    ):
        self.net = net
        self.params = params
        self.t_sys = t_sys
        self.windows = {
            lane_class: MonitorWindow(t_sys, params.half_width(lane_class))
            for lane_class in LaneClass
        }
        cav_list = list(cavs)
        self._counts: Counter = Counter()
        for lane_class, window in self.windows.items():
            self._counts.update(count_anticipated_entries(cav_list, window, net, lane_class))
        self._hv: Dict[int, int] = {
            edge.id: hv_log.delta_n(edge.id, self.windows[LaneClass.GPL])
            for edge in net.edges
            if edge.has_lane(LaneClass.GPL)
        }
        self._times: Dict[EdgeLane, float] = {
            edge_lane: self._evaluate(edge_lane) for edge_lane in net.edge_lanes()
        }

    def count(self, edge_lane: EdgeLane) -> int:
        return self._counts[edge_lane]

    def flow(self, edge_lane: EdgeLane) -> float:
        lane_class = edge_lane[1]
        total = self._counts[edge_lane]
        if lane_class is LaneClass.GPL:
            total += self._hv.get(edge_lane[0], 0)
        return total / (2 * self.windows[lane_class].half_width)

    def time(self, edge_lane: EdgeLane) -> float:
        return self._times[edge_lane]

    def estimate(self, edge_lane: EdgeLane) -> FlowEstimate:
        return FlowEstimate(
            edge_lane[0], edge_lane[1], self.flow(edge_lane), self._times[edge_lane], self.t_sys
        )

    def costs(self) -> Mapping[EdgeLane, float]:
        return self._times

    def move(
        self, entry_time: float, old: Optional[EdgeLane], new: Optional[EdgeLane]
    ) -> None:
        """Shift one CAV's anticipated entry from `old` to `new`."""
        if old is not None and in_window(entry_time, self.windows[old[1]]):
            self._counts[old] -= 1
            self._times[old] = self._evaluate(old)
        if new is not None and in_window(entry_time, self.windows[new[1]]):
            self._counts[new] += 1
            self._times[new] = self._evaluate(new)

    def _evaluate(self, edge_lane: EdgeLane) -> float:
        lane = self.net.lane(edge_lane)
        return bpr_time(lane.free_flow_time, self.flow(edge_lane), lane.capacity, self.params.bpr)


class TravelTimeLog:
    """Traversal times reported as vehicles reach the end of an edge-lane.

    Reports arrive in nondecreasing time order per edge-lane, so window
    means are two binary searches over the report times.
    """

    def __init__(self) -> None:
        self._times: Dict[EdgeLane, List[int]] = {}
        self._traversals: Dict[EdgeLane, List[float]] = {}

    def record(self, edge_lane: EdgeLane, t: int, traversal: float) -> None:
        times = self._times.setdefault(edge_lane, [])
        if times and t < times[-1]:
            raise ValueError(
                f"Travel time reports on {edge_lane} must be nondecreasing ({t} < {times[-1]})"
            )
        times.append(t)
        self._traversals.setdefault(edge_lane, []).append(traversal)

    def count(self, edge_lane: EdgeLane, start: int, end: int) -> int:
        times = self._times.get(edge_lane, [])
        return bisect_right(times, end) - bisect_left(times, start)

    def mean(self, edge_lane: EdgeLane, start: int, end: int) -> Optional[float]:
        """Mean traversal reported in [start, end], or None without reports."""
        times = self._times.get(edge_lane)
        if not times:
            return None
        lo, hi = bisect_left(times, start), bisect_right(times, end)
        if lo == hi:
            return None
        reported = self._traversals[edge_lane][lo:hi]
        return sum(reported) / len(reported)


def experienced_travel_times(
    net: RoadNetwork, log: TravelTimeLog, t: int, window: int
) -> Dict[EdgeLane, float]:
    """Mean traversal of the vehicles that finished each lane in [t - window, t].

    Lanes nobody finished recently are taken at free flow.
    """
    times: Dict[EdgeLane, float] = {}
    for edge_lane in net.edge_lanes():
        experienced = log.mean(edge_lane, t - window, t)
        times[edge_lane] = (
            experienced if experienced is not None else net.lane(edge_lane).free_flow_time
        )
    return times


def free_flow_times(net: RoadNetwork) -> Dict[EdgeLane, float]:
    return {edge_lane: net.lane(edge_lane).free_flow_time for edge_lane in net.edge_lanes()}
