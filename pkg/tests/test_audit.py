"""
Tests for the post-hoc trace audit.
"""

import math

import pytest

from laneshare.core.flowmodel import SensorLog
from laneshare.core.network import LaneClass, VehicleClass
from laneshare.sim import EventTrace, TraceRecord, audit_trace

FREE_FLOW = {1: 10, 2: 20, 3: 15, 4: 25, 5: 10}


def spawn(trace, t, vehicle, vclass="cav", route=(1, 2, 5)):
    trace.append(
        t,
        "spawn",
        vehicle=vehicle,
        **{"class": vclass},
        origin=1,
        destination=6,
        route=list(route),
        lanes=[],
    )


def enter(trace, t, vehicle, edge, lane, vclass="cav", traversal=None):
    if traversal is None:
        traversal = float(FREE_FLOW.get(edge, 10))
    trace.append(
        t,
        "edge-enter",
        vehicle=vehicle,
        **{"class": vclass},
        edge=edge,
        lane=lane,
        traversal=traversal,
        exit=t + math.ceil(traversal),
    )


def leave(trace, t, vehicle, edge, lane, vclass="cav"):
    trace.append(t, "edge-exit", vehicle=vehicle, **{"class": vclass}, edge=edge, lane=lane)


def complete(trace, t, vehicle, route, lanes, vclass="cav"):
    trace.append(
        t,
        "trip-complete",
        vehicle=vehicle,
        **{"class": vclass},
        travel_time=t,
        free_flow_time=40,
        dwell=0,
        route=list(route),
        lanes=list(lanes),
    )


@pytest.fixture
def clean_trace():
    trace = EventTrace()
    spawn(trace, 0, 1)
    enter(trace, 0, 1, 1, "dl")
    enter(trace, 10, 1, 2, "gpl")
    enter(trace, 30, 1, 5, "dl")
    complete(trace, 40, 1, [1, 2, 5], ["dl", "gpl", "dl"])
    return trace


class TestAudit:
    """Each invariant is reported with the record that breaks it."""

    def test_clean_trace(self, small_net, clean_trace):
        report = audit_trace(clean_trace, small_net)
        assert report.ok
        assert (report.records, report.spawned, report.completed) == (5, 1, 1)
        assert report.in_network == 0

    def test_out_of_order_records(self, small_net):
        records = [
            TraceRecord(5, 0, "spawn", {"vehicle": 1, "class": "hv", "route": []}),
            TraceRecord(4, 1, "spawn", {"vehicle": 2, "class": "hv", "route": []}),
        ]
        report = audit_trace(records, small_net)
        assert any("out of order" in v for v in report.violations)

    def test_double_spawn(self, small_net):
        trace = EventTrace()
        spawn(trace, 0, 1)
        spawn(trace, 1, 1)
        assert "spawned twice" in audit_trace(trace, small_net).violations[0]

    def test_activity_outside_lifetime(self, small_net, clean_trace):
        enter(clean_trace, 41, 1, 1, "dl")
        enter(clean_trace, 42, 7, 1, "dl")
        violations = audit_trace(clean_trace, small_net).violations
        assert any("after its trip completed" in v for v in violations)
        assert any("vehicle 7 before its spawn" in v for v in violations)

    def test_illegal_lanes(self, small_net):
        trace = EventTrace()
        spawn(trace, 0, 1, "hv")
        enter(trace, 0, 1, 1, "dl", "hv")
        enter(trace, 10, 1, 3, "dl", "hv")
        violations = audit_trace(trace, small_net).violations
        assert any("hv 1 on dl lane" in v for v in violations)
        assert any("edge 3 has no dl lane" in v for v in violations)

    def test_broken_route_and_unknown_edge(self, small_net):
        trace = EventTrace()
        spawn(trace, 0, 1)
        enter(trace, 0, 1, 1, "gpl")
        enter(trace, 10, 1, 4, "gpl")
        enter(trace, 20, 1, 99, "gpl")
        violations = audit_trace(trace, small_net).violations
        assert any("breaks at edge 4" in v for v in violations)
        assert any("unknown edge 99" in v for v in violations)

    def test_edge_timing(self, small_net):
        trace = EventTrace()
        spawn(trace, 0, 1)
        enter(trace, 0, 1, 1, "dl", traversal=12.4)
        leave(trace, 13, 1, 1, "dl")
        enter(trace, 13, 1, 2, "gpl", traversal=20.0)
        leave(trace, 30, 1, 2, "gpl")
        enter(trace, 30, 1, 5, "dl", traversal=6.0)
        violations = audit_trace(trace, small_net).violations
        assert any("left edge 2 due at t=33" in v for v in violations)
        assert any("crosses edge 5 faster than free flow" in v for v in violations)
        assert not any("left edge 1" in v for v in violations)

    def test_exit_must_follow_traversal(self, small_net):
        trace = EventTrace()
        spawn(trace, 0, 2)
        trace.append(
            0,
            "edge-enter",
            vehicle=2,
            **{"class": "cav"},
            edge=1,
            lane="dl",
            traversal=10.0,
            exit=45,
        )
        violations = audit_trace(trace, small_net).violations
        assert violations == ["t=0 seq=1: exit of vehicle 2 disagrees with traversal"]

    def test_bus_leaves_when_its_dwell_ends(self, small_net):
        trace = EventTrace()
        spawn(trace, 0, 0, "bus", route=(1, 2, 5))
        enter(trace, 0, 0, 1, "dl", "bus")
        leave(trace, 10, 0, 1, "dl", "bus")
        enter(trace, 10, 0, 2, "dl", "bus")
        trace.append(30, "dwell", vehicle=0, stop=5, duration=60, until=90)
        leave(trace, 90, 0, 2, "dl", "bus")
        enter(trace, 90, 0, 5, "dl", "bus")
        leave(trace, 95, 0, 5, "dl", "bus")
        violations = audit_trace(trace, small_net).violations
        assert violations == ["t=95 seq=7: vehicle 0 left edge 5 due at t=100"]

    def test_completion_must_match_driven_route(self, small_net):
        trace = EventTrace()
        spawn(trace, 0, 1)
        enter(trace, 0, 1, 1, "dl")
        complete(trace, 10, 1, [1, 2], ["dl", "dl"])
        assert any("did not drive" in v for v in audit_trace(trace, small_net).violations)

    def test_bus_keeps_its_route(self, small_net):
        trace = EventTrace()
        spawn(trace, 0, 0, "bus", route=(1, 2, 5))
        enter(trace, 0, 0, 1, "dl", "bus")
        complete(trace, 10, 0, [1], ["dl"], "bus")
        assert any("left its fixed route" in v for v in audit_trace(trace, small_net).violations)

    def test_one_shot_triggers(self, small_net):
        trace = EventTrace()
        for t in (10, 11):
            trace.append(t, "trigger", bus=0, line="L", run=0, k=1, edge=2, node=2)
        assert any("triggered twice" in v for v in audit_trace(trace, small_net).violations)

    def test_reroute_soundness(self, small_net):
        trace = EventTrace()
        spawn(trace, 0, 0, "bus")
        spawn(trace, 0, 3)
        trace.append(
            100,
            "reroute",
            policy="coordinated",
            bus=0,
            k=1,
            excluded_edge=2,
            excluded_lane="dl",
            members=[3, 0],
            assignments=[
                {"vehicle": 3, "route": [2, 5], "lanes": ["dl", "dl"], "entry": 140, "cost": 30},
                {"vehicle": 0, "route": [2, 5], "lanes": ["gpl", "dl"], "entry": 105, "cost": 30},
            ],
            kept_original=[],
            skipped_claimed=[],
        )
        violations = audit_trace(trace, small_net, delta_t_dl=30).violations
        assert any("vehicle 3 assigned the excluded lane" in v for v in violations)
        assert any("vehicle 3 rerouted outside the monitoring window" in v for v in violations)
        assert any("non-CAV vehicle 0 rerouted" in v for v in violations)

    def test_drp_reroute_of_non_cav(self, small_net):
        trace = EventTrace()
        spawn(trace, 0, 4, "hv")
        trace.append(10, "reroute", policy="drp", vehicle=4, node=2, route=[2, 5])
        violations = audit_trace(trace, small_net).violations
        assert violations == ["t=10 seq=1: non-CAV vehicle 4 rerouted"]


class TestSensorConsistency:
    """Traced entries agree with the run's sensor log."""

    def test_matching_log(self, small_net, clean_trace):
        sensors = SensorLog()
        sensors.record((1, LaneClass.JOINT_DL), VehicleClass.CAV, 0)
        sensors.record((2, LaneClass.GPL), VehicleClass.CAV, 10)
        sensors.record((5, LaneClass.JOINT_DL), VehicleClass.CAV, 30)
        assert audit_trace(clean_trace, small_net, sensors=sensors).ok

    def test_missing_and_extra_entries(self, small_net, clean_trace):
        sensors = SensorLog()
        sensors.record((1, LaneClass.JOINT_DL), VehicleClass.CAV, 0)
        sensors.record((1, LaneClass.JOINT_DL), VehicleClass.CAV, 3)
        violations = audit_trace(clean_trace, small_net, sensors=sensors).violations
        expected = "edge 1 dl lane: 1 cav entries traced, 2 in the sensor log"
        assert any(expected in v for v in violations)
        assert any("edge 2 gpl lane" in v for v in violations)
