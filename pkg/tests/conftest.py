"""
Shared fixtures for the laneshare test suite.

The small scenario used throughout:

    1 --e1(10)--> 2 --e2(20, station 5)--> 3 --e5(10)--> 6
    |                                      ^
    +--e3(15)--> 4 --------e4(25)----------+

Edges 1, 2 and 5 carry a joint DL and a GPL; edges 3 and 4 are GPL
only. Node labels map to ids label - 1. The bus line "L" drives
1-2-3-6 with stops 5 at +30 s and 6 at +100 s.
"""

import copy
from typing import Any, Dict

import pytest

from laneshare.config.models import ScenarioDocument
from laneshare.core.network import RoadNetwork, load_network

SMALL_SCENARIO: Dict[str, Any] = {
    "format_version": 1,
    "name": "small",
    "nodes": [
        {"id": 1},
        {"id": 2},
        {"id": 3},
        {"id": 4},
        {"id": 5, "kind": "station"},
        {"id": 6},
    ],
    "edges": [
        {"id": 1, "from": 1, "to": 2, "free_flow_time": 10},
        {"id": 2, "from": 2, "to": 3, "free_flow_time": 20, "bus_stop": 5},
        {"id": 3, "from": 1, "to": 4, "free_flow_time": 15},
        {"id": 4, "from": 4, "to": 3, "free_flow_time": 25},
        {"id": 5, "from": 3, "to": 6, "free_flow_time": 10},
    ],
    "lanes": [
        {"edge": 1, "class": "dl", "capacity": 0.1},
        {"edge": 1, "class": "gpl", "capacity": 0.2},
        {"edge": 2, "class": "dl", "capacity": 0.1},
        {"edge": 2, "class": "gpl"},
        {"edge": 3, "class": "gpl"},
        {"edge": 4, "class": "gpl"},
        {"edge": 5, "class": "gpl", "capacity": 0.2},
        {"edge": 5, "class": "dl", "capacity": 0.1},
    ],
    "bus_lines": [
        {
            "id": "L",
            "route": [1, 2, 3, 6],
            "stops": [{"node": 5, "offset": 30}, {"node": 6, "offset": 100}],
            "first_departure": 0,
            "headway": 120,
            "runs": 3,
        }
    ],
    "demand": {
        "cav": {"rate_per_min": 6, "od_pairs": [[1, 6]]},
        "hv": {"rate_per_min": 6, "od_pairs": [[1, 3]]},
    },
    "params": {"horizon": 300, "drain_limit": 600, "default_capacity_gpl": 0.3},
}


@pytest.fixture
def small_data() -> Dict[str, Any]:
    """A fresh, mutable copy of the small scenario document."""
    return copy.deepcopy(SMALL_SCENARIO)


@pytest.fixture
def small_doc(small_data) -> ScenarioDocument:
    return ScenarioDocument(**small_data)


@pytest.fixture
def small_net(small_doc) -> RoadNetwork:
    return load_network(small_doc)
