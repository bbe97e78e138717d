"""
Reusable UI components for laneshare output.
"""

import math
import re
from typing import List, Optional, Sequence

from .colors import LaneshareColors

_ANSI = re.compile(r"\033\[[0-9;]*m")


def visible_len(text: str) -> int:
    """Length of text as displayed, ignoring ANSI escape codes."""
    return len(_ANSI.sub("", text))


def _pad(text: str, width: int, right: bool) -> str:
    fill = " " * max(0, width - visible_len(text))
    return fill + text if right else text + fill


class LaneshareComponents:
    """Reusable UI components for formatted output."""

    @staticmethod
    def create_table(
        headers: Sequence[str],
        rows: Sequence[Sequence[str]],
        title: Optional[str] = None,
        align_right: Sequence[int] = (),
    ) -> str:
        """Create an ASCII table with optional title.

        Args:
            headers: Column headers
            rows: Row cells, already formatted (may contain color codes)
            title: Optional table title
            align_right: Indexes of columns to right-align (numbers)

        Returns:
            Formatted table string
        """
        widths = [len(h) for h in headers]
        for row in rows:
            for i, cell in enumerate(row):
                widths[i] = max(widths[i], visible_len(str(cell)))

        separator = "+" + "+".join("-" * (w + 2) for w in widths) + "+"
        total_width = len(separator)

        result: List[str] = []
        if title:
            title_str = LaneshareColors.colorize(title, LaneshareColors.CYAN, LaneshareColors.BOLD)
            inner = total_width - 2
            left = max(0, (inner - len(title)) // 2)
            right = max(0, inner - left - len(title))
            title_separator = "+" + "-" * inner + "+"
            result.extend([title_separator, "|" + " " * left + title_str + " " * right + "|"])

        header = "|" + "|".join(
            " " + _pad(LaneshareColors.colorize(h, LaneshareColors.CYAN), w, False) + " "
            for w, h in zip(widths, headers)
        ) + "|"
        result.extend([separator, header, separator])

        for row in rows:
            cells = [
                " " + _pad(str(cell), widths[i], i in align_right) + " "
                for i, cell in enumerate(row)
            ]
            result.append("|" + "|".join(cells) + "|")

        result.append(separator)
        return "\n".join(result)

    @staticmethod
    def create_progress_bar(pct: float, width: int = 20) -> str:
        """Bar showing a percentage, colored like on-time values."""
        if math.isnan(pct):
            return LaneshareColors.colorize("░" * width, LaneshareColors.DIM) + "   n/a"
        pct = max(0.0, min(100.0, pct))
        filled = int(round(width * pct / 100))
        bar = "█" * filled + "░" * (width - filled)
        color = LaneshareColors.on_time_color(pct)
        return f"{LaneshareColors.colorize(bar, color)} {pct:5.1f}%"
