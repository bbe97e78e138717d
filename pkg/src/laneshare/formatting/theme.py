"""
Theme configuration for laneshare terminal output.
"""


class LaneshareTheme:
    """Symbols used by the terminal reports."""

    # Feature flags
    USE_EMOJI = True
    USE_COLORS = True

    STATUS = {
        "ok": "✅",
        "failed": "❌",
        "warning": "⚠️",
        "on-time": "🟢",
        "late": "🔴",
        "unknown": "❓",
    }

    VEHICLES = {
        "bus": "🚌",
        "cav": "🚗",
        "hv": "🚙",
    }

    SECTIONS = {
        "header": "📌",
        "scenario": "🗺️",
        "statistics": "📊",
        "stations": "🚏",
        "policies": "🧭",
        "diagnostics": "📝",
        "output": "💾",
    }

    @classmethod
    def _pick(cls, table: dict, key: str, fallback: str) -> str:
        if not cls.USE_EMOJI:
            return ""
        return table.get(key.lower(), fallback)

    @classmethod
    def get_status_emoji(cls, status: str) -> str:
        return cls._pick(cls.STATUS, status, cls.STATUS["unknown"])

    @classmethod
    def get_vehicle_emoji(cls, vclass: str) -> str:
        return cls._pick(cls.VEHICLES, vclass, "")

    @classmethod
    def get_section_emoji(cls, section: str) -> str:
        """Get emoji for a section type with fallback."""
        return cls._pick(cls.SECTIONS, section, cls.SECTIONS["header"])
