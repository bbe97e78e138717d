"""
Run metrics extracted from an event trace.

Everything here is computed from the trace alone, so reports can be
rebuilt from a saved trace.jsonl:
- Accumulated bus delay at the destination, per tick, counting runs
  still overdue on the road
- On-time percentage per bus stop
- Cumulative travel time of completed trips per class, per tick
- Per-class 90th-percentile travel time and mean trip delay
"""

from dataclasses import dataclass, field
import os
from typing import Dict, Iterable, List, Optional, Union

import numpy as np
import pandas as pd

from ..core.fleet import is_on_time
from ..core.network import VehicleClass
from .trace import EventTrace, TraceRecord

SERIES_COLUMNS = ["time", "bus_delay", "cav_cum_tt", "hv_cum_tt", "bus_cum_tt"]
STATION_COLUMNS = ["stop", "station", "scheduled_runs", "on_time", "on_time_pct"]
SUMMARY_COLUMNS = [
    "class",
    "spawned",
    "completed",
    "mean_travel_time",
    "p90_travel_time",
    "mean_trip_delay",
    "cum_travel_time",
]


@dataclass
class ClassSummary:
    vclass: VehicleClass
    spawned: int = 0
    travel_times: List[int] = field(default_factory=list)
    trip_delays: List[float] = field(default_factory=list)

    @property
    def completed(self) -> int:
        return len(self.travel_times)

    @property
    def mean_travel_time(self) -> float:
        return float(np.mean(self.travel_times)) if self.travel_times else float("nan")

    @property
    def p90_travel_time(self) -> float:
        if not self.travel_times:
            return float("nan")
        return float(np.percentile(self.travel_times, 90))

    @property
    def mean_trip_delay(self) -> float:
        return float(np.mean(self.trip_delays)) if self.trip_delays else float("nan")

    @property
    def cum_travel_time(self) -> int:
        return int(sum(self.travel_times))


@dataclass
class StationSummary:
    stop: int
    station: bool
    scheduled_runs: int = 0
    on_time: int = 0

    @property
    def on_time_pct(self) -> float:
        if self.scheduled_runs == 0:
            return float("nan")
        return 100.0 * self.on_time / self.scheduled_runs


@dataclass
class MetricsReport:
    """Time series and per-class aggregates of one run.

    Series are indexed by tick from 0 to the end time.
    """

    times: np.ndarray
    bus_delay: np.ndarray
    cumulative_travel_time: Dict[VehicleClass, np.ndarray]
    stations: Dict[int, StationSummary]
    classes: Dict[VehicleClass, ClassSummary]
    overdue_runs: int = 0
    overdue_delay: float = 0.0

    @property
    def total_bus_delay(self) -> float:
        """Lateness at the destination, including runs still overdue at the end."""
        return float(self.bus_delay[-1]) if len(self.bus_delay) else 0.0

    @property
    def arrived_bus_delay(self) -> float:
        """Lateness of runs that reached their destination."""
        return self.total_bus_delay - self.overdue_delay

    def station_on_time(self) -> Dict[int, float]:
        """On-time percentage of each intermediate station, in stop order."""
        return {s.stop: s.on_time_pct for s in self.stations.values() if s.station}

    def mean_station_on_time(self) -> float:
        values = [v for v in self.station_on_time().values() if not np.isnan(v)]
        return float(np.mean(values)) if values else float("nan")

    def series_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "time": self.times,
                "bus_delay": self.bus_delay,
                "cav_cum_tt": self.cumulative_travel_time[VehicleClass.CAV],
                "hv_cum_tt": self.cumulative_travel_time[VehicleClass.HV],
                "bus_cum_tt": self.cumulative_travel_time[VehicleClass.BUS],
            },
            columns=SERIES_COLUMNS,
        )

    def stations_frame(self) -> pd.DataFrame:
        rows = [
            {
                "stop": s.stop,
                "station": s.station,
                "scheduled_runs": s.scheduled_runs,
                "on_time": s.on_time,
                "on_time_pct": s.on_time_pct,
            }
            for s in self.stations.values()
        ]
        return pd.DataFrame(rows, columns=STATION_COLUMNS)

    def summary_frame(self) -> pd.DataFrame:
        rows = [
            {
                "class": c.vclass.value,
                "spawned": c.spawned,
                "completed": c.completed,
                "mean_travel_time": c.mean_travel_time,
                "p90_travel_time": c.p90_travel_time,
                "mean_trip_delay": c.mean_trip_delay,
                "cum_travel_time": c.cum_travel_time,
            }
            for c in self.classes.values()
        ]
        return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)

    def write_csv(self, out_dir: Union[str, os.PathLike]) -> List[str]:
        """Write series.csv, stations.csv and summary.csv; return their paths."""
        os.makedirs(out_dir, exist_ok=True)
        paths = []
        for name, frame in (
            ("series.csv", self.series_frame()),
            ("stations.csv", self.stations_frame()),
            ("summary.csv", self.summary_frame()),
        ):
            path = os.path.join(out_dir, name)
            frame.to_csv(path, index=False)
            paths.append(path)
        return paths


def _ordered(trace: Union[EventTrace, Iterable[TraceRecord]]) -> List[TraceRecord]:
    return sorted(trace, key=lambda r: (r.time, r.seq))


def _lateness(times: np.ndarray, due: int, arrived: Optional[int]) -> np.ndarray:
    """Per-tick lateness of one run: grows while overdue, frozen at arrival."""
    until = times if arrived is None else np.minimum(times, arrived)
    return np.maximum(0, until - due)


def accumulate_metrics(
    trace: Union[EventTrace, Iterable[TraceRecord]],
    on_time_tolerance: int = 60,
    end_time: Optional[int] = None,
) -> MetricsReport:
    """Build a MetricsReport from a complete or partial trace.

    A bus run counts as scheduled at every stop of its timetable once it
    has been dispatched; runs that never reach a stop count as not on
    time there. A dispatched run that is past its scheduled destination
    time adds its running lateness to the bus delay series until it
    arrives, so runs still on the road at the end are not dropped.
    Percentiles and trip delays cover completed trips only.

    Args:
        trace: Records of one run
        on_time_tolerance: On-time band around the scheduled arrival
        end_time: Last tick of the run; defaults to the last traced time
    """
    records = _ordered(trace)
    end = records[-1].time if records else 0
    if end_time is not None:
        end = max(end, end_time)
    times = np.arange(end + 1)

    classes = {c: ClassSummary(c) for c in VehicleClass}
    stations: Dict[int, StationSummary] = {}
    destination_of: Dict[int, int] = {}
    due_of: Dict[int, int] = {}
    arrived_of: Dict[int, int] = {}
    completed_at = {c: np.zeros(end + 1) for c in VehicleClass}

    for record in records:
        if record.kind == "spawn":
            vclass = VehicleClass(record["class"])
            classes[vclass].spawned += 1
            if vclass is VehicleClass.BUS:
                vid = record["vehicle"]
                destination_of[vid] = record["destination"]
                for stop in record["stops"]:
                    summary = stations.setdefault(
                        stop["stop"], StationSummary(stop["stop"], stop["station"])
                    )
                    summary.scheduled_runs += 1
                    if stop["stop"] == record["destination"]:
                        due_of[vid] = stop["scheduled"]
        elif record.kind == "stop-arrival":
            if is_on_time(record["deviation"], on_time_tolerance):
                stations[record["stop"]].on_time += 1
            vid = record["vehicle"]
            if destination_of.get(vid) == record["stop"]:
                arrived_of[vid] = record.time
                due_of.setdefault(vid, record["scheduled"])
        elif record.kind == "trip-complete":
            vclass = VehicleClass(record["class"])
            travel_time = record["travel_time"]
            summary_c = classes[vclass]
            summary_c.travel_times.append(travel_time)
            summary_c.trip_delays.append(
                travel_time - record["free_flow_time"] - record.get("dwell", 0)
            )
            completed_at[vclass][record.time] += travel_time

    bus_delay = np.zeros(end + 1)
    overdue_runs = 0
    overdue_delay = 0.0
    for vid, due in due_of.items():
        arrived = arrived_of.get(vid)
        lateness = _lateness(times, due, arrived)
        bus_delay += lateness
        if arrived is None and lateness[-1] > 0:
            overdue_runs += 1
            overdue_delay += float(lateness[-1])

    return MetricsReport(
        times=times,
        bus_delay=bus_delay,
        cumulative_travel_time={c: np.cumsum(v) for c, v in completed_at.items()},
        stations=stations,
        classes=classes,
        overdue_runs=overdue_runs,
        overdue_delay=overdue_delay,
    )
