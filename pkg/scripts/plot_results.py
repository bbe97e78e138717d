#!/usr/bin/env python3
"""
Plot the tables written by `laneshare compare`.

Usage:
    python scripts/plot_results.py runs/vanness-compare [--out DIR]

Draws accumulated bus delay and cumulative CAV / HV travel time over
time (one line per policy), the on-time table as grouped bars, and,
for penetration sweeps, mean trip delay per class against penetration.
PNG files are written next to the CSVs unless --out is given.
Needs the optional plot extra: pip install -e ".[plot]"
"""

import argparse
from pathlib import Path
import sys
from typing import Dict, List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

SERIES = {
    "bus_delay": ("Accumulated bus delay", "Delay (s)"),
    "cav_cum_tt": ("Cumulative CAV travel time", "Travel time (s)"),
    "hv_cum_tt": ("Cumulative HV travel time", "Travel time (s)"),
}


def _load_series(compare_dir: Path) -> Dict[str, pd.DataFrame]:
    """Series CSVs keyed by their policy (and penetration) suffix."""
    return {
        path.stem[len("series_") :]: pd.read_csv(path)
        for path in sorted(compare_dir.glob("series_*.csv"))
    }


def plot_series(series: Dict[str, pd.DataFrame], out_dir: Path) -> List[Path]:
    written = []
    for column, (title, ylabel) in SERIES.items():
        plt.figure(figsize=(10, 6))
        for name, frame in series.items():
            plt.plot(frame["time"] / 60.0, frame[column], label=name)
        plt.title(title)
        plt.xlabel("Simulation time (min)")
        plt.ylabel(ylabel)
        plt.grid(True)
        plt.legend()
        path = out_dir / f"{column}.png"
        plt.savefig(path, dpi=120, bbox_inches="tight")
        plt.close()
        written.append(path)
    return written


def plot_on_time(table: pd.DataFrame, out_dir: Path) -> Path:
    """Grouped bars: stations on the x axis, one bar per policy."""
    value_cols = [c for c in table.columns if c.startswith("Station") or c == "Average"]
    labels = table["policy"].astype(str)
    if "penetration" in table.columns:
        labels = labels + " " + (table["penetration"] * 100).round().astype(int).astype(str) + "%"
    frame = table[value_cols].set_index(labels).T
    ax = frame.plot.bar(figsize=(10, 6), rot=0)
    ax.set_title("Bus on-time arrivals")
    ax.set_ylabel("On time (%)")
    ax.set_ylim(0, 100)
    ax.grid(True, axis="y")
    path = out_dir / "on_time.png"
    ax.figure.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(ax.figure)
    return path


def plot_trip_delay(table: pd.DataFrame, out_dir: Path) -> Path:
    plt.figure(figsize=(10, 6))
    classes = [c for c in ("cav", "hv", "bus") if c in table.columns]
    for policy, group in table.groupby("policy", sort=False):
        group = group.sort_values("penetration")
        for vclass in classes:
            plt.plot(
                group["penetration"] * 100,
                group[vclass],
                marker="o",
                label=f"{policy} {vclass.upper()}",
            )
    plt.title("Mean trip delay by CAV penetration")
    plt.xlabel("CAV penetration (%)")
    plt.ylabel("Mean trip delay (s)")
    plt.grid(True)
    plt.legend()
    path = out_dir / "trip_delay_by_penetration.png"
    plt.savefig(path, dpi=120, bbox_inches="tight")
    plt.close()
    return path


def main(argv: List[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Plot laneshare comparison results")
    parser.add_argument("compare_dir", type=Path, help="Output directory of laneshare compare")
    parser.add_argument("--out", type=Path, help="Where to write PNGs (default: compare_dir)")
    args = parser.parse_args(argv)

    compare_dir: Path = args.compare_dir
    if not (compare_dir / "table_on_time.csv").exists():
        print(f"❌ No comparison tables in {compare_dir}")
        return 1
    out_dir: Path = args.out or compare_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    written = plot_series(_load_series(compare_dir), out_dir)
    written.append(plot_on_time(pd.read_csv(compare_dir / "table_on_time.csv"), out_dir))
    sweep = compare_dir / "trip_delay_by_penetration.csv"
    if sweep.exists():
        written.append(plot_trip_delay(pd.read_csv(sweep), out_dir))

    for path in written:
        print(f"📊 {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
