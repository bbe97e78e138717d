"""
Tests for coordinated, bus-aware CAV rerouting.

The fixture places bus 0 on edge 1 from t=100 (free-flow arrival at
node 2 at t=110). Edge 2's DL has free-flow time 20 and capacity 0.1, so
at lambda 0.1 the trigger needs six CAVs anticipated on it inside the
30 s DL window; five keep it below the threshold.
"""

from itertools import product

import numpy as np
import pytest

from laneshare.config.models import ScenarioDocument
from laneshare.core.fleet import CavState, initial_bus_states
from laneshare.core.flowmodel import (
    AnticipatedTravelTimes,
    FlowModelParams,
    HvEntryLog,
    SensorLog,
)
from laneshare.core.network import LaneClass, Route, load_network
from laneshare.routing.base import FleetSnapshot
from laneshare.routing.coordinated import (
    CoordinatedPolicy,
    Trigger,
    TriggerConfig,
    apply_reroute,
    detect_trigger,
    expected_entry,
    identify_reroute_set,
    reoptimize_set,
)
from laneshare.routing.dijkstra import route_cost

DL = LaneClass.JOINT_DL
GPL = LaneClass.GPL
PARAMS = FlowModelParams()
ALL_DL = Route((1, 2, 5), (DL, DL, DL))


def cav(cav_id, entry_time, route=ALL_DL):
    state = CavState(id=cav_id, origin=0, destination=5, route=route, spawn_time=entry_time)
    state.enter(entry_time, entry_time + 10)
    return state


def bus_on_first_edge(net, doc, t=100):
    bus = initial_bus_states(net, doc.bus_lines)[0]
    bus.enter(t, t + 10)
    return bus


def waiting_cav(cav_id, t):
    """A CAV spawned at node 1 that has not entered its first edge."""
    return CavState(id=cav_id, origin=0, destination=5, route=ALL_DL, spawn_time=t)


def snapshot(t, cavs, buses, sensors=None, departures=()):
    sensors = sensors if sensors is not None else SensorLog()
    return FleetSnapshot(
        t=t,
        cavs=cavs,
        buses=buses,
        sensors=sensors,
        hv_log=HvEntryLog(sensors),
        departures=departures,
    )


@pytest.fixture
def platoon():
    # ids given out of entry order; anticipated entries 105..110
    return [cav(10 + i, 100 - i) for i in range(6)]


class TestTriggerConfig:
    """Tolerance validation and one-shot bookkeeping."""

    @pytest.mark.parametrize("value", [0.0, -0.1, float("nan"), float("inf")])
    def test_lambda_must_be_positive(self, value):
        with pytest.raises(ValueError):
            TriggerConfig(value)

    def test_fired_pairs(self):
        config = TriggerConfig(0.2)
        assert config.threshold(50) == pytest.approx(60)
        config.mark(3, 1)
        assert config.has_fired(3, 1)
        assert not config.has_fired(3, 2)


class TestDetectTrigger:
    """Trigger condition inside the bus's control horizon."""

    def test_fires_at_threshold(self, small_net, small_doc, platoon):
        bus = bus_on_first_edge(small_net, small_doc)
        config = TriggerConfig(0.1)
        trigger = detect_trigger(bus, snapshot(100, platoon, [bus]), small_net, config, PARAMS)
        assert trigger is not None
        assert (trigger.bus_id, trigger.k, trigger.edge_id, trigger.node) == (0, 1, 2, 1)
        assert trigger.anticipated_flow == pytest.approx(6 / 60)
        assert trigger.anticipated_time >= 1.1 * trigger.free_flow_time
        assert trigger.target == (2, DL)
        assert config.has_fired(0, 1)

    def test_fires_once_per_bus_and_edge(self, small_net, small_doc, platoon):
        bus = bus_on_first_edge(small_net, small_doc)
        config = TriggerConfig(0.1)
        view = snapshot(100, platoon, [bus])
        assert detect_trigger(bus, view, small_net, config, PARAMS) is not None
        assert detect_trigger(bus, view, small_net, config, PARAMS) is None

    def test_more_cavs_never_cancel_a_trigger(self, small_net, small_doc):
        rng = np.random.default_rng(3)
        elsewhere = Route((1, 2, 5), (DL, GPL, DL))
        fired = 0
        for _ in range(300):
            bus = bus_on_first_edge(small_net, small_doc)
            t = int(rng.integers(100, 111))
            cavs = []
            for i in range(int(rng.integers(0, 20))):
                route = ALL_DL if rng.random() < 0.6 else elsewhere
                cavs.append(cav(20 + i, int(rng.integers(t - 45, t + 1)), route))
            extra = [
                cav(60 + i, int(rng.integers(t - 40, t + 1)))
                for i in range(int(rng.integers(1, 5)))
            ]
            before = detect_trigger(
                bus, snapshot(t, cavs, [bus]), small_net, TriggerConfig(0.1), PARAMS
            )
            after = detect_trigger(
                bus, snapshot(t, cavs + extra, [bus]), small_net, TriggerConfig(0.1), PARAMS
            )
            if before is not None:
                fired += 1
                assert after is not None
                assert after.anticipated_flow > before.anticipated_flow
        assert fired > 0

    def test_below_threshold(self, small_net, small_doc, platoon):
        bus = bus_on_first_edge(small_net, small_doc)
        view = snapshot(100, platoon[:5], [bus])
        assert detect_trigger(bus, view, small_net, TriggerConfig(0.1), PARAMS) is None

    def test_outside_control_horizon(self, small_net, small_doc, platoon):
        bus = bus_on_first_edge(small_net, small_doc)
        view = snapshot(111, platoon, [bus])
        assert detect_trigger(bus, view, small_net, TriggerConfig(0.1), PARAMS) is None

    def test_bus_not_departed_or_on_last_edge(self, small_net, small_doc, platoon):
        bus = initial_bus_states(small_net, small_doc.bus_lines)[0]
        view = snapshot(100, platoon, [bus])
        assert detect_trigger(bus, view, small_net, TriggerConfig(0.1), PARAMS) is None
        bus.enter(60, 70)
        bus.enter(70, 90)
        bus.enter(90, 100)
        assert detect_trigger(bus, view, small_net, TriggerConfig(0.1), PARAMS) is None


class TestReroute:
    """Reroute set identification, sequential reassignment and commit."""

    def trigger(self, net, doc, cavs):
        bus = bus_on_first_edge(net, doc)
        view = snapshot(100, cavs, [bus])
        trigger = detect_trigger(bus, view, net, TriggerConfig(0.1), PARAMS)
        assert trigger is not None
        return trigger, view

    def test_set_ordered_by_entry_time(self, small_net, small_doc, platoon):
        trigger, view = self.trigger(small_net, small_doc, platoon)
        bystander = cav(99, 100, Route((1, 2, 5), (GPL, GPL, GPL)))
        members = identify_reroute_set(trigger, platoon + [bystander], small_net, PARAMS)
        assert members == [15, 14, 13, 12, 11, 10]

    def test_reoptimize_excludes_congested_lane(self, small_net, small_doc, platoon):
        trigger, view = self.trigger(small_net, small_doc, platoon)
        members = identify_reroute_set(trigger, platoon, small_net, PARAMS)
        event = reoptimize_set(trigger, members, view, small_net, PARAMS)

        assert event.rerouted == tuple(members)
        assert [a.vehicle for a in event.assignments] == members
        assert all(a.route == Route((2, 5), (GPL, DL)) for a in event.assignments)
        assert not any(a.route.uses((2, DL)) for a in event.assignments)
        assert all(abs(a.entry_time - 100) <= PARAMS.delta_t_dl for a in event.assignments)
        costs = [a.cost for a in event.assignments]
        # each assignment sees the GPL flow added by the ones before it
        assert costs == sorted(costs)
        assert costs[-1] > costs[0]
        assert event.kept_original == ()

    def test_claimed_cavs_are_skipped(self, small_net, small_doc, platoon):
        trigger, view = self.trigger(small_net, small_doc, platoon)
        platoon[0].claim(bus_id=5, k=1)
        members = identify_reroute_set(trigger, platoon, small_net, PARAMS)
        event = reoptimize_set(trigger, members, view, small_net, PARAMS)
        assert event.skipped_claimed == (10,)
        assert 10 not in event.routes()

    def test_no_alternative_keeps_route(self, small_data):
        small_data["lanes"] = [
            lane
            for lane in small_data["lanes"]
            if not (lane["edge"] == 2 and lane["class"] == "gpl")
        ]
        doc = ScenarioDocument(**small_data)
        net = load_network(doc)
        cavs = [cav(10 + i, 100 - i) for i in range(6)]
        trigger, view = self.trigger(net, doc, cavs)
        members = identify_reroute_set(trigger, cavs, net, PARAMS)
        event = reoptimize_set(trigger, members, view, net, PARAMS)
        assert event.assignments == ()
        assert event.kept_original == tuple(members)

    def departure_trigger(self):
        """Congestion on the DL of edge 1, seen from node 1 at t=100."""
        return Trigger(
            bus_id=0,
            k=0,
            time=100,
            edge_id=1,
            node=0,
            anticipated_flow=0.0,
            anticipated_time=10.0,
            free_flow_time=10.0,
        )

    def candidate_routes(self, net):
        routes = []
        for edges in ((1, 2, 5), (3, 4, 5)):
            lanes = [[lc for lc in LaneClass if net.edge(e).has_lane(lc)] for e in edges]
            routes.extend(Route(edges, choice) for choice in product(*lanes))
        return [r for r in routes if not r.uses((1, DL))]

    def joint_cost(self, net, view, pair, routes):
        table = AnticipatedTravelTimes(net, PARAMS, view.t, view.cavs, view.hv_log)
        for state, route in zip(pair, routes):
            table.move(state.next_entry_time(net), state.next_step(), route.step(0))
        return sum(route_cost(route, table.costs()) for route in routes)

    def best_joint_cost(self, net, view, pair):
        candidates = self.candidate_routes(net)
        return min(
            self.joint_cost(net, view, pair, combo) for combo in product(candidates, repeat=2)
        )

    def test_pair_splits_when_sharing_costs_more(self, small_net):
        sensors = SensorLog()
        for t in range(45, 99, 3):
            HvEntryLog(sensors).record(1, t)
        # already heading for the GPL of edge 1
        bystander = CavState(
            id=9, origin=0, destination=5, route=Route((1, 2, 5), (GPL, DL, DL)), spawn_time=100
        )
        pair = [waiting_cav(1, 100), waiting_cav(2, 100)]
        view = snapshot(100, pair + [bystander], [], sensors=sensors)

        event = reoptimize_set(self.departure_trigger(), [1, 2], view, small_net, PARAMS)
        routes = [a.route for a in event.assignments]
        assert [a.vehicle for a in event.assignments] == [1, 2]
        assert routes[0].step(0) == (1, GPL)
        assert routes[1].step(0) == (3, GPL)
        assert self.joint_cost(small_net, view, pair, routes) == pytest.approx(
            self.best_joint_cost(small_net, view, pair)
        )

    def test_pair_shares_a_route_with_ample_capacity(self, small_net):
        pair = [waiting_cav(1, 100), waiting_cav(2, 100)]
        view = snapshot(100, pair, [])

        event = reoptimize_set(self.departure_trigger(), [1, 2], view, small_net, PARAMS)
        first, second = (a.route for a in event.assignments)
        assert first == second
        assert first.step(0) == (1, GPL)
        assert self.joint_cost(small_net, view, pair, [first, second]) == pytest.approx(
            self.best_joint_cost(small_net, view, pair)
        )

    def test_apply_replans_and_claims(self, small_net, small_doc, platoon):
        trigger, view = self.trigger(small_net, small_doc, platoon)
        members = identify_reroute_set(trigger, platoon, small_net, PARAMS)
        event = reoptimize_set(trigger, members, view, small_net, PARAMS)
        apply_reroute(event, platoon)
        for state in platoon:
            assert state.route == Route((1, 2, 5), (DL, GPL, DL))
            assert state.claimed_by == (0, 1)
            assert state.is_claimed()
            assert state.reroutes == 1

    def test_event_fields(self, small_net, small_doc, platoon):
        trigger, view = self.trigger(small_net, small_doc, platoon)
        members = identify_reroute_set(trigger, platoon, small_net, PARAMS)
        fields = reoptimize_set(trigger, members, view, small_net, PARAMS).to_fields()
        assert fields["policy"] == "coordinated"
        assert (fields["bus"], fields["k"]) == (0, 1)
        assert (fields["excluded_edge"], fields["excluded_lane"]) == (2, "dl")
        assert fields["members"] == members
        assert fields["assignments"][0]["lanes"] == ["gpl", "dl"]
        assert fields["assignments"][0]["route"] == [2, 5]


class TestCoordinatedPolicy:
    """The policy as driven by the engine."""

    def test_evaluate_emits_trigger_then_reroute(self, small_net, small_doc, platoon):
        router = CoordinatedPolicy(small_net, small_doc.params)
        bus = bus_on_first_edge(small_net, small_doc)
        events = router.evaluate(snapshot(100, platoon, [bus]))
        assert [e.kind for e in events] == ["trigger", "reroute"]
        trigger = events[0].fields
        assert (trigger["bus"], trigger["line"], trigger["run"]) == (0, "L", 0)
        assert (trigger["edge"], trigger["node"]) == (2, 2)
        assert all(state.route.lane_choice[1] is GPL for state in platoon)

        # rerouted CAVs no longer load the DL; nothing fires again
        assert router.evaluate(snapshot(101, platoon, [bus])) == []

    def test_spawn_routes_spread_over_lanes(self, small_net, small_doc):
        router = CoordinatedPolicy(small_net, small_doc.params)
        view = snapshot(0, [], [])
        first = router.cav_route(view, 0, 5)
        second = router.cav_route(view, 0, 5)
        assert first.step(0) == (1, DL)
        assert second.step(0) == (1, GPL)
        assert first.edges == second.edges == (1, 2, 5)

    def test_fired_trigger_holds_the_dl_edge(self, small_net, small_doc, platoon):
        router = CoordinatedPolicy(small_net, small_doc.params)
        bus = bus_on_first_edge(small_net, small_doc)
        router.evaluate(snapshot(100, platoon, [bus]))

        view = snapshot(100, platoon, [bus])
        assert router.held_lanes(view) == {(2, DL)}
        assert not router.cav_route(view, 0, 5).uses((2, DL))

        bus.enter(110, 130)
        assert router.held_lanes(snapshot(110, platoon, [bus])) == frozenset()

    def test_departing_bus_holds_its_first_edge(self, small_net, small_doc):
        router = CoordinatedPolicy(small_net, small_doc.params)
        pending = initial_bus_states(small_net, small_doc.bus_lines)[1:]
        # run 1 departs at t=120
        assert router.held_lanes(snapshot(89, [], [], departures=pending)) == frozenset()
        view = snapshot(90, [], [], departures=pending)
        assert router.held_lanes(view) == {(1, DL)}
        assert router.cav_route(view, 0, 5).step(0) == (1, GPL)

        pending[0].enter(120, 130)
        view = snapshot(121, [], [pending[0]], departures=pending[1:])
        assert router.held_lanes(view) == frozenset()

    def test_expected_entry_counts_the_dwell_ahead(self, small_net, small_doc):
        bus = initial_bus_states(small_net, small_doc.bus_lines)[0]
        assert expected_entry(bus, 60) == 0
        bus.enter(0, 10)
        assert expected_entry(bus, 60) == 10
        bus.enter(10, 30)
        assert expected_entry(bus, 60) == 90
        bus.stop_arrivals[bus.stop_on_current_edge()] = 30
        bus.exit_time = 90
        assert expected_entry(bus, 60) == 90
        # the destination stop has no dwell
        bus.enter(90, 100)
        assert expected_entry(bus, 60) == 100


class TestIntersectionReplanning:
    """Unclaimed CAVs re-plan when they reach an intersection."""

    def test_held_lane_forces_a_new_route(self, small_net, small_doc, platoon):
        router = CoordinatedPolicy(small_net, small_doc.params)
        bus = bus_on_first_edge(small_net, small_doc)
        router.evaluate(snapshot(100, platoon, [bus]))

        late = cav(30, 95)
        events = router.evaluate(snapshot(105, platoon + [late], [bus]))
        # platoon CAV 15 also reaches node 2 now but is still claimed
        assert [e.kind for e in events] == ["reroute"]
        fields = events[0].fields
        assert (fields["policy"], fields["vehicle"], fields["node"]) == ("coordinated", 30, 2)
        assert fields["old_route"] == fields["route"] == [2, 5]
        assert fields["lanes"][0] == "gpl"
        assert late.route.step(1) == (2, GPL)
        assert platoon[5].reroutes == 1

    def test_cav_switches_away_from_a_crowded_lane(self, small_net, small_doc):
        router = CoordinatedPolicy(small_net, small_doc.params)
        crowd = [cav(40 + i, 98) for i in range(8)]
        state = cav(30, 95)
        events = router.evaluate(snapshot(105, crowd + [state], []))
        assert [e.fields["vehicle"] for e in events] == [30]
        assert events[0].fields["cost"] < events[0].fields["old_cost"]
        assert state.route == Route((1, 2, 5), (DL, GPL, DL))
        assert all(c.route == ALL_DL for c in crowd)

    def test_route_kept_without_a_cheaper_option(self, small_net, small_doc):
        router = CoordinatedPolicy(small_net, small_doc.params)
        state = cav(30, 95)
        assert router.evaluate(snapshot(105, [state], [])) == []
        assert state.route == ALL_DL
        assert state.reroutes == 0
