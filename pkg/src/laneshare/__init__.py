"""
laneshare - mesoscopic simulation of coordinated CAV routing on bus lanes
shared with connected and automated vehicles.
"""

__version__ = "0.1.0"

from .config.loader import load_scenario  # noqa: E402
from .sim.engine import Simulation, run_simulation  # noqa: E402

__all__ = ["load_scenario", "Simulation", "run_simulation", "__version__"]
