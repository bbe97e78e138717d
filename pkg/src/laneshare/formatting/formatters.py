"""
Core formatting functions for laneshare output.
"""

import math

from .colors import LaneshareColors
from .theme import LaneshareTheme


class LaneshareFormatters:
    """Formatting of single values and headers."""

    @staticmethod
    def format_seconds(seconds: float) -> str:
        """Format a duration in seconds as e.g. "1h 02m 05s".

        NaN renders as "n/a"; durations under a minute keep one decimal.
        """
        if math.isnan(seconds):
            return "n/a"
        if abs(seconds) < 60:
            return f"{seconds:.1f}s"
        total = int(round(seconds))
        sign = "-" if total < 0 else ""
        total = abs(total)
        hours, rest = divmod(total, 3600)
        minutes, secs = divmod(rest, 60)
        if hours:
            return f"{sign}{hours}h {minutes:02d}m {secs:02d}s"
        return f"{sign}{minutes}m {secs:02d}s"

    @staticmethod
    def format_percentage(value: float) -> str:
        if math.isnan(value):
            return LaneshareColors.colorize("n/a", LaneshareColors.DIM)
        color = LaneshareColors.on_time_color(value)
        return LaneshareColors.colorize(f"{value:.1f}%", color)

    @staticmethod
    def format_status(status: str) -> str:
        """Format status with emoji and color."""
        emoji = LaneshareTheme.get_status_emoji(status)
        color = LaneshareColors.status_color(status)
        text = LaneshareColors.colorize(status.upper(), color)
        return f"{emoji} {text}" if emoji else text

    @staticmethod
    def format_section_header(title: str, section_type: str = "header") -> str:
        """Format section header with emoji and border.

        Args:
            title: Section title
            section_type: Type of section for emoji selection

        Returns:
            Formatted section header
        """
        emoji = LaneshareTheme.get_section_emoji(section_type)
        header = f"{emoji} {title}" if emoji else title
        border = "═" * len(header)
        return f"\n{header}\n{border}\n"

    @staticmethod
    def format_key_value(key: str, value: str, emoji: str = "") -> str:
        key_str = LaneshareColors.colorize(key, LaneshareColors.CYAN)
        prefix = f"{emoji} " if emoji else ""
        return f"{prefix}{key_str}: {value}"
