"""
Simulation engine, event trace and trace-derived metrics.
"""

from .audit import AuditReport, audit_trace
from .engine import Simulation, run_simulation
from .metrics import MetricsReport, accumulate_metrics
from .trace import EVENT_KINDS, EventTrace, TraceRecord

__all__ = [
    "AuditReport",
    "audit_trace",
    "Simulation",
    "run_simulation",
    "MetricsReport",
    "accumulate_metrics",
    "EVENT_KINDS",
    "EventTrace",
    "TraceRecord",
]
