"""
Routing policies for laneshare.
"""

from typing import Dict, Type

from ..config.models import ScenarioParams
from ..core.network import RoadNetwork
from .base import FleetSnapshot, Policy, PolicyEvent, RoutingPolicy
from .coordinated import CoordinatedPolicy
from .definitions import (
    COORDINATED_DESC,
    DRP_DESC,
    SRP_DESC,
    SRP_NO_JOINT_DL_DESC,
)
from .dijkstra import prediction_aware_shortest_path, route_cost
from .dynamic import DrpPolicy
from .static import SrpNoJointDlPolicy, SrpPolicy, srp_route

POLICY_CLASSES: Dict[Policy, Type[RoutingPolicy]] = {
    Policy.SRP: SrpPolicy,
    Policy.DRP: DrpPolicy,
    Policy.COORDINATED: CoordinatedPolicy,
    Policy.SRP_NO_JOINT_DL: SrpNoJointDlPolicy,
}

POLICY_DESCRIPTIONS: Dict[Policy, str] = {
    Policy.SRP: SRP_DESC,
    Policy.DRP: DRP_DESC,
    Policy.COORDINATED: COORDINATED_DESC,
    Policy.SRP_NO_JOINT_DL: SRP_NO_JOINT_DL_DESC,
}


def create_policy(policy: Policy, net: RoadNetwork, params: ScenarioParams) -> RoutingPolicy:
    """Instantiate a fresh policy for one run."""
    return POLICY_CLASSES[policy](net, params)


__all__ = [
    "FleetSnapshot",
    "Policy",
    "PolicyEvent",
    "RoutingPolicy",
    "SrpPolicy",
    "SrpNoJointDlPolicy",
    "DrpPolicy",
    "CoordinatedPolicy",
    "POLICY_DESCRIPTIONS",
    "create_policy",
    "prediction_aware_shortest_path",
    "route_cost",
    "srp_route",
]
