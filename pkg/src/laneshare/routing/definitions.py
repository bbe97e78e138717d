"""
Policy descriptions for the laneshare CLI.
"""

SRP_DESC = """Static route planning. Every CAV gets the free-flow shortest route
at departure and keeps it. CAVs may use the joint dedicated lane.

Example:
laneshare simulate --scenario vanness --policy srp --seed 1"""

DRP_DESC = """Dynamic route planning. CAVs route on measured travel times (trailing
monitoring window of sensor counts) and switch at each intersection when a
strictly faster route exists. Each CAV decides for itself.

Example:
laneshare simulate --scenario vanness --policy drp --seed 1"""

COORDINATED_DESC = """Coordinated bus-aware rerouting. CAVs start on routes planned with
anticipated travel times. While a bus approaches an intersection, its next
dedicated-lane edge is watched; when the anticipated time reaches
(1 + lambda) times free flow, the CAVs expected on that lane are rerouted
one by one with the lane excluded.

Parameters:
--lambda - Trigger tolerance (default 0.1)
--window-dl - DL monitoring half-width in seconds (default 30)
--window-gpl - GPL monitoring half-width in seconds (default 60)

Example:
laneshare simulate --scenario vanness --policy coordinated --seed 1 --lambda 0.1"""

SRP_NO_JOINT_DL_DESC = """Static route planning with the dedicated lane reserved for buses.
CAVs are confined to general-purpose lanes.

Example:
laneshare simulate --scenario vanness --policy srp-no-joint-dl --seed 1"""
