"""
Tests for the prediction-aware shortest path search.
"""

import math

import numpy as np
import pytest

from laneshare.core.errors import NoFeasiblePath
from laneshare.core.flowmodel import free_flow_times
from laneshare.core.network import (
    Edge,
    Lane,
    LaneClass,
    Node,
    NodeKind,
    RoadNetwork,
    Route,
    VehicleClass,
    feasible_routes,
)
from laneshare.routing.dijkstra import (
    cheapest_lane,
    prediction_aware_shortest_path,
    route_cost,
)

DL = LaneClass.JOINT_DL
GPL = LaneClass.GPL


def random_network(rng, n_nodes=5, n_edges=9):
    nodes = [Node(i, i + 1, NodeKind.INTERSECTION) for i in range(n_nodes)]
    edges = []
    for edge_id in range(1, n_edges + 1):
        a, b = rng.choice(n_nodes, size=2, replace=False)
        tau = float(rng.integers(1, 10))
        kind = rng.integers(3)
        classes = [(DL,), (GPL,), (DL, GPL)][kind]
        lanes = tuple(Lane(c, 0.5, tau) for c in classes)
        edges.append(Edge(edge_id, int(a), int(b), lanes))
    return RoadNetwork(nodes, edges)


def random_costs(rng, net):
    return {step: float(rng.integers(1, 20)) for step in net.edge_lanes()}


class TestShortestPath:
    """Deterministic search on the small scenario."""

    def test_free_flow_route(self, small_net):
        route = prediction_aware_shortest_path(small_net, free_flow_times(small_net), 0, 5)
        assert route == Route((1, 2, 5), (DL, DL, DL))

    def test_hv_gets_gpl(self, small_net):
        route = prediction_aware_shortest_path(
            small_net, free_flow_times(small_net), 0, 5, VehicleClass.HV
        )
        assert route == Route((1, 2, 5), (GPL, GPL, GPL))

    def test_cheaper_gpl_wins(self, small_net):
        costs = free_flow_times(small_net)
        costs[(2, DL)] = 25.0
        route = prediction_aware_shortest_path(small_net, costs, 0, 5)
        assert route.lane_choice == (DL, GPL, DL)

    def test_congestion_diverts_to_other_path(self, small_net):
        costs = free_flow_times(small_net)
        costs[(2, DL)] = costs[(2, GPL)] = 60.0
        route = prediction_aware_shortest_path(small_net, costs, 0, 5)
        assert route.edges == (3, 4, 5)
        assert route_cost(route, costs) == 50

    def test_excluded_lane(self, small_net):
        route = prediction_aware_shortest_path(
            small_net, free_flow_times(small_net), 0, 5, excluded_lanes={(2, DL)}
        )
        assert route == Route((1, 2, 5), (DL, GPL, DL))

    def test_excluded_edge(self, small_net):
        route = prediction_aware_shortest_path(
            small_net, free_flow_times(small_net), 0, 5, excluded={2}
        )
        assert route.edges == (3, 4, 5)

    def test_unreachable(self, small_net):
        with pytest.raises(NoFeasiblePath, match="from node 6 to node 1"):
            prediction_aware_shortest_path(small_net, free_flow_times(small_net), 5, 0)
        with pytest.raises(NoFeasiblePath):
            prediction_aware_shortest_path(
                small_net, free_flow_times(small_net), 0, 5, VehicleClass.BUS, excluded={2}
            )

    def test_same_node(self, small_net):
        assert prediction_aware_shortest_path(small_net, {}, 3, 3) == Route()

    def test_equal_cost_lanes_prefer_dl(self, small_net):
        lane, cost = cheapest_lane(small_net, 5, {(5, DL): 7.0, (5, GPL): 7.0}, VehicleClass.CAV)
        assert (lane, cost) == (DL, 7.0)

    def test_equal_cost_paths_prefer_lower_edge(self, small_net):
        costs = free_flow_times(small_net)
        # both paths to node 3 now cost 30
        costs[(1, DL)] = costs[(1, GPL)] = 10.0
        costs[(2, DL)] = costs[(2, GPL)] = 20.0
        costs[(3, GPL)] = 5.0
        route = prediction_aware_shortest_path(small_net, costs, 0, 5)
        assert route.edges == (1, 2, 5)

    def test_invalid_costs(self, small_net):
        costs = free_flow_times(small_net)
        costs[(4, GPL)] = math.nan
        with pytest.raises(ValueError):
            prediction_aware_shortest_path(small_net, costs, 0, 5)
        del costs[(4, GPL)]
        with pytest.raises(KeyError):
            prediction_aware_shortest_path(small_net, costs, 0, 5)


class TestAgainstEnumeration:
    """The search agrees with brute force over every feasible route."""

    def test_random_networks(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            net = random_network(rng)
            costs = random_costs(rng, net)
            vclass = [VehicleClass.CAV, VehicleClass.HV, VehicleClass.BUS][rng.integers(3)]
            source, target = (int(x) for x in rng.choice(len(net.nodes), 2, replace=False))
            excluded = {int(rng.integers(1, len(net.edges) + 1))} if rng.random() < 0.3 else set()
            excluded_lanes = {(e, DL) for e in range(1, 4)} if rng.random() < 0.3 else set()

            candidates = feasible_routes(net, source, target, vclass, excluded, excluded_lanes)
            if not candidates.exists:
                with pytest.raises(NoFeasiblePath):
                    prediction_aware_shortest_path(
                        net, costs, source, target, vclass, excluded, excluded_lanes
                    )
                continue

            best = min(route_cost(r, costs) for r in candidates)
            route = prediction_aware_shortest_path(
                net, costs, source, target, vclass, excluded, excluded_lanes
            )
            assert route_cost(route, costs) == best
            net.check_route(route, vclass, start=source, end=target)
            assert not set(route.edges) & excluded
            assert not any(route.uses(step) for step in excluded_lanes)

    def test_repeatable(self):
        rng = np.random.default_rng(11)
        net = random_network(rng, n_nodes=8, n_edges=20)
        costs = random_costs(rng, net)
        routes = set()
        for _ in range(20):
            try:
                routes.add(prediction_aware_shortest_path(net, costs, 0, 7))
            except NoFeasiblePath:
                routes.add(None)
        assert len(routes) == 1
