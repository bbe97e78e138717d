"""
Color utilities for laneshare terminal output.
"""

import math
from typing import Optional

from .theme import LaneshareTheme


class LaneshareColors:
    """ANSI color definitions and utilities for terminal output."""

    RED = "\033[31m"
    GREEN = "\033[32m"
    YELLOW = "\033[33m"
    BLUE = "\033[34m"
    CYAN = "\033[36m"

    BOLD = "\033[1m"
    DIM = "\033[2m"

    RESET = "\033[0m"

    @classmethod
    def colorize(cls, text: str, color: str, style: Optional[str] = None) -> str:
        """Wrap text in ANSI codes, or return it unchanged when the theme
        has colors switched off (--no-color or output not a terminal)."""
        if not LaneshareTheme.USE_COLORS:
            return text
        return f"{style or ''}{color}{text}{cls.RESET}"

    @classmethod
    def status_color(cls, status: str) -> str:
        status = status.lower()
        if status in ("ok", "on-time"):
            return cls.GREEN
        elif status in ("failed", "late"):
            return cls.RED
        elif status == "warning":
            return cls.YELLOW
        return cls.BLUE

    @classmethod
    def on_time_color(cls, pct: float, good: float = 80.0, poor: float = 40.0) -> str:
        """Color for an on-time percentage: green at or above `good`,
        red at or below `poor`, yellow in between."""
        if math.isnan(pct):
            return cls.DIM
        if pct >= good:
            return cls.GREEN
        elif pct <= poor:
            return cls.RED
        return cls.YELLOW
