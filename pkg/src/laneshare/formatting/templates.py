"""
Output templates for laneshare reports.
"""

import math
from typing import TYPE_CHECKING, List, Sequence

from ..core.errors import LaneshareError
from ..core.network import VehicleClass
from .colors import LaneshareColors
from .components import LaneshareComponents
from .formatters import LaneshareFormatters
from .theme import LaneshareTheme

if TYPE_CHECKING:
    from ..experiment import ComparisonTable, RunResult
    from ..sim.metrics import MetricsReport


def _num(value: float, digits: int = 1) -> str:
    return "n/a" if math.isnan(value) else f"{value:,.{digits}f}"


class LaneshareTemplates:
    """Text reports for the CLI subcommands."""

    @staticmethod
    def validation_report(source: str, issues: Sequence[LaneshareError]) -> str:
        """Template for `laneshare validate` output.

        Args:
            source: Scenario path or bundled name
            issues: Diagnostics found, empty when the scenario is clean

        Returns:
            Formatted report string
        """
        result = [LaneshareFormatters.format_section_header(f"Scenario {source}", "scenario")]
        if not issues:
            result.append(f"{LaneshareFormatters.format_status('ok')}  all checks passed")
            return "\n".join(result)

        result.append(
            f"{LaneshareFormatters.format_status('failed')}  {len(issues)} problem(s) found"
        )
        result.append("")
        for issue in issues:
            result.append(f"  • {type(issue).__name__}: {issue}")
        return "\n".join(result)

    @staticmethod
    def class_table(report: "MetricsReport", title: str = "Travel times") -> str:
        rows: List[List[str]] = []
        for vclass in VehicleClass:
            summary = report.classes[vclass]
            emoji = LaneshareTheme.get_vehicle_emoji(vclass.value)
            rows.append(
                [
                    f"{emoji} {vclass.value.upper()}" if emoji else vclass.value.upper(),
                    str(summary.spawned),
                    str(summary.completed),
                    _num(summary.mean_travel_time),
                    _num(summary.p90_travel_time),
                    _num(summary.mean_trip_delay),
                    f"{summary.cum_travel_time:,}",
                ]
            )
        return LaneshareComponents.create_table(
            [
                "Class",
                "Spawned",
                "Done",
                "Mean TT (s)",
                "P90 TT (s)",
                "Mean delay (s)",
                "Cum TT (s)",
            ],
            rows,
            title=title,
            align_right=range(1, 7),
        )

    @staticmethod
    def run_summary(result: "RunResult") -> str:
        """Template for `laneshare simulate` output."""
        report = result.report
        assert report is not None
        key = result.key
        result_lines = [
            LaneshareFormatters.format_section_header(f"Run {key.label}", "statistics"),
            LaneshareFormatters.format_key_value("Events", f"{result.events:,}"),
            LaneshareFormatters.format_key_value("Trace digest", (result.digest or "")[:16]),
            LaneshareFormatters.format_key_value(
                "Accumulated bus delay", LaneshareFormatters.format_seconds(report.total_bus_delay)
            ),
            LaneshareFormatters.format_section_header("On-time arrivals", "stations"),
        ]
        for i, (stop, pct) in enumerate(report.station_on_time().items(), start=1):
            bar = LaneshareComponents.create_progress_bar(pct)
            result_lines.append(f"  Station {i} (node {stop})  {bar}")
        result_lines.append("")
        result_lines.append(LaneshareTemplates.class_table(report))
        result_lines.append("")

        if result.violations:
            result_lines.append(
                f"{LaneshareFormatters.format_status('warning')}  "
                f"trace audit: {len(result.violations)} violation(s), see audit.txt"
            )
        else:
            result_lines.append(f"{LaneshareFormatters.format_status('ok')}  trace audit clean")
        result_lines.append(LaneshareFormatters.format_key_value("Output", result.out_dir))
        return "\n".join(result_lines)

    @staticmethod
    def comparison(table: "ComparisonTable", out_dir: str) -> str:
        """Template for `laneshare compare` output: the on-time table,
        per-class seed means and any failed runs."""
        result = [LaneshareFormatters.format_section_header("Policy comparison", "policies")]

        on_time = table.on_time_frame()
        if not on_time.empty:
            value_cols = [c for c in on_time.columns if c.startswith("Station") or c == "Average"]
            key_cols = [c for c in on_time.columns if c not in value_cols]
            rows = []
            for _, row in on_time.iterrows():
                keys = [
                    f"{row[c]:.0%}" if c == "penetration" else str(row[c]) for c in key_cols
                ]
                values = [LaneshareFormatters.format_percentage(row[c]) for c in value_cols]
                rows.append(keys + values)
            headers = [c.capitalize() for c in key_cols] + value_cols
            result.append(
                LaneshareComponents.create_table(
                    headers,
                    rows,
                    title="Bus on-time arrivals (seed mean)",
                    align_right=range(len(key_cols), len(headers)),
                )
            )
            result.append("")

        summary = table.class_summary_frame()
        if not summary.empty:
            key_cols = [c for c in ("penetration", "policy", "class") if c in summary.columns]
            rows = []
            for _, row in summary.iterrows():
                keys = [
                    f"{row[c]:.0%}" if c == "penetration" else str(row[c]) for c in key_cols
                ]
                rows.append(
                    keys
                    + [
                        _num(row["mean_travel_time"]),
                        _num(row["p90_travel_time"]),
                        _num(row["mean_trip_delay"]),
                        _num(row["cum_travel_time"], 0),
                    ]
                )
            headers = [c.capitalize() for c in key_cols] + [
                "Mean TT (s)",
                "P90 TT (s)",
                "Mean delay (s)",
                "Cum TT (s)",
            ]
            result.append(
                LaneshareComponents.create_table(
                    headers,
                    rows,
                    title="Travel times by class (seed mean)",
                    align_right=range(len(key_cols), len(headers)),
                )
            )
            result.append("")

        done = len(table.completed)
        total = len(table.results)
        if table.failures:
            status = LaneshareFormatters.format_status("failed")
            result.append(f"{status}  {total - done} of {total} runs failed")
            for failed in table.failures:
                result.append(f"  • {failed.key.label}: {failed.error}")
        else:
            result.append(f"{LaneshareFormatters.format_status('ok')}  {done} runs completed")
        result.append(
            LaneshareFormatters.format_key_value(
                "Output", LaneshareColors.colorize(out_dir, LaneshareColors.BOLD)
            )
        )
        return "\n".join(result)
