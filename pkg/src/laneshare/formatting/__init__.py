"""
Terminal formatting for laneshare reports.
"""

from .colors import LaneshareColors
from .components import LaneshareComponents
from .formatters import LaneshareFormatters
from .templates import LaneshareTemplates
from .theme import LaneshareTheme

__all__ = [
    "LaneshareTheme",
    "LaneshareColors",
    "LaneshareFormatters",
    "LaneshareTemplates",
    "LaneshareComponents",
]
