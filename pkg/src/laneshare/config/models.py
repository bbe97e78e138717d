"""
Configuration models for laneshare.

This module defines Pydantic models for the scenario document, for
experiments and for logging:
- Road graph sections (nodes, edges, lanes)
- Bus lines with their timetables
- CAV and HV demand streams
- Flow-model, trigger and engine parameters
- Experiment matrices run by the CLI
- Logging configuration

The models provide field-level validation and defaults. Cross-section
invariants (dangling references, connectivity, timetable ordering) are
checked by the network loader, which needs the whole document.
"""

import math
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

CURRENT_FORMAT_VERSION = 1


class NodeSpec(BaseModel):
    """A node of the road graph, identified by its map label."""

    id: int = Field(ge=0, description="Node label as drawn on the map (e.g. 7)")
    kind: Literal["intersection", "station"] = "intersection"
    x: float = 0.0  # meters, reporting only
    y: float = 0.0

    @field_validator("x", "y")
    @classmethod
    def validate_finite(cls, v: float) -> float:
        """Reject NaN and infinite coordinates."""
        if not math.isfinite(v):
            raise ValueError("Node coordinates must be finite")
        return v


class EdgeSpec(BaseModel):
    """A directed road segment between two intersections."""

    model_config = ConfigDict(populate_by_name=True)

    id: int = Field(ge=0)
    from_node: int = Field(alias="from")
    to_node: int = Field(alias="to")
    free_flow_time: float = Field(gt=0, description="Free-flow traversal time in seconds")
    bus_stop: Optional[int] = None  # label of a station located on this edge


class LaneSpec(BaseModel):
    """A lane of an edge. Capacity falls back to the class default in params."""

    model_config = ConfigDict(populate_by_name=True)

    edge: int
    lane_class: Literal["dl", "gpl"] = Field(alias="class")
    capacity: Optional[float] = Field(default=None, gt=0)


class StopSpec(BaseModel):
    """A timetable entry: stop node and scheduled offset from departure."""

    node: int
    offset: int = Field(ge=0)


class BusLineSpec(BaseModel):
    """A bus line: fixed route over intersections plus its timetable."""

    id: str
    route: List[int] = Field(min_length=2)
    stops: List[StopSpec] = Field(default_factory=list)
    first_departure: int = Field(default=0, ge=0)
    headway: int = Field(default=360, gt=0)
    runs: int = Field(default=1, ge=0)


class DemandStream(BaseModel):
    """Arrival rate of one vehicle class and the OD pairs it draws from."""

    rate_per_min: float = Field(default=0.0, ge=0)
    od_pairs: List[Tuple[int, int]] = Field(default_factory=list)


class DemandSpec(BaseModel):
    """Demand for the routable (CAV) and passive (HV) vehicle classes."""

    cav: DemandStream = Field(default_factory=DemandStream)
    hv: DemandStream = Field(default_factory=DemandStream)


class ScenarioParams(BaseModel):
    """Model and engine parameters with their calibrated defaults."""

    model_config = ConfigDict(populate_by_name=True)

    alpha: float = Field(default=0.15, ge=0)
    beta: float = Field(default=4.0, ge=1)
    delta_t_dl: int = Field(default=30, ge=1)
    delta_t_gpl: int = Field(default=60, ge=1)
    lambda_: float = Field(default=0.1, gt=0, alias="lambda")
    on_time_tolerance: int = Field(default=60, ge=0)
    dwell_time: int = Field(default=60, ge=0)
    horizon: int = Field(default=3600, gt=0)
    drain_limit: int = Field(default=1800, ge=0)
    drp_window: int = Field(default=60, ge=1)
    default_capacity_dl: float = Field(default=0.5, gt=0)
    default_capacity_gpl: float = Field(default=0.5, gt=0)
    spawn_mode: Literal["fixed-interval", "poisson"] = "fixed-interval"

    @field_validator("alpha", "beta")
    @classmethod
    def validate_finite(cls, v: float) -> float:
        """BPR parameters must be finite."""
        if not math.isfinite(v):
            raise ValueError("BPR parameters must be finite")
        return v


class ScenarioDocument(BaseModel):
    """Root scenario model.

    The `params` section is required even when every value is left at
    its default, so that a scenario always states its parameters
    explicitly.
    """

    format_version: int = Field(default=CURRENT_FORMAT_VERSION)
    name: str
    description: str = ""
    nodes: List[NodeSpec]
    edges: List[EdgeSpec]
    lanes: List[LaneSpec]
    bus_lines: List[BusLineSpec] = Field(default_factory=list)
    demand: DemandSpec = Field(default_factory=DemandSpec)
    params: ScenarioParams

    @field_validator("format_version")
    @classmethod
    def validate_format_version(cls, v: int) -> int:
        """Only the current document format is understood."""
        if v != CURRENT_FORMAT_VERSION:
            raise ValueError(
                f"Unsupported format_version {v}; expected {CURRENT_FORMAT_VERSION}"
            )
        return v


class LoggingConfig(BaseModel):
    """Model for logging configuration.

    Console logging goes to stderr at the configured level; a log file
    is added when a path is given.
    """

    level: str = "WARNING"
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    file: Optional[str] = None


PolicyName = Literal["srp", "drp", "coordinated", "srp-no-joint-dl"]


class ExperimentSpec(BaseModel):
    """Model for one CLI experiment: a policy x seed (x penetration) matrix.

    Overrides left as None keep the scenario's own values.
    """

    model_config = ConfigDict(populate_by_name=True)

    scenario: str
    policies: List[PolicyName] = Field(min_length=1)
    seeds: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5], min_length=1)
    horizon: Optional[int] = Field(default=None, gt=0)
    penetrations: List[float] = Field(default_factory=list)
    total_demand: Optional[float] = Field(default=None, gt=0, description="veh/h, CAV + HV")
    out: str
    lambda_: Optional[float] = Field(default=None, gt=0, alias="lambda")
    delta_t_dl: Optional[int] = Field(default=None, ge=1)
    delta_t_gpl: Optional[int] = Field(default=None, ge=1)
    workers: Optional[int] = Field(default=None, ge=1)

    @field_validator("penetrations")
    @classmethod
    def validate_penetrations(cls, v: List[float]) -> List[float]:
        """Each penetration is a CAV share in (0, 1]."""
        for p in v:
            if not 0 < p <= 1:
                raise ValueError(f"penetration must be in (0, 1], got {p}")
        if len(set(v)) != len(v):
            raise ValueError("penetrations must be distinct")
        return v

    @field_validator("policies", "seeds")
    @classmethod
    def validate_distinct(cls, v: List) -> List:
        if len(set(v)) != len(v):
            raise ValueError("entries must be distinct")
        return v
