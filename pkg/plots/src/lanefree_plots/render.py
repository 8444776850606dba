"""Figure rendering from the simulator's tidy CSV exports.

Four figure kinds are supported, each a read-only view of its input file:
per-vehicle speed trajectories (one line per method), lateral-position
trajectories (one line per vehicle), five-minute interval speed bars, and
the lateral-jerk percentage histogram. Every plotted number comes straight
from the CSV; nothing is recomputed.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib
import pandas as pd

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

FIGURE_KINDS = ("speed-traj", "lateral-traj", "interval-bars", "jerk-hist")

REQUIRED_COLUMNS = {
    "speed-traj": ["time_s", "vehicle_id", "vx_mps"],
    "lateral-traj": ["time_s", "vehicle_id", "y_m"],
    "interval-bars": ["method", "interval", "v_avg_mps"],
    "jerk-hist": ["method", "bin_low", "bin_high", "pct"],
}


class SchemaError(ValueError):
    """Input CSV does not match the documented schema."""


@dataclass(frozen=True)
class PlotSpec:
    input_csv: Path
    kind: str
    output: Path
    vehicle_id: int | None = None

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; "
                              f"expected one of {', '.join(FIGURE_KINDS)}")


def _load(spec: PlotSpec) -> pd.DataFrame:
    try:
        df = pd.read_csv(spec.input_csv)
    except pd.errors.EmptyDataError:
        raise SchemaError(f"{spec.input_csv}: file is empty")
    missing = [c for c in REQUIRED_COLUMNS[spec.kind] if c not in df.columns]
    if missing:
        raise SchemaError(f"{spec.input_csv}: missing columns "
                          f"{', '.join(missing)}")
    if df.empty:
        raise SchemaError(f"{spec.input_csv}: no data rows")
    return df


def render(spec: PlotSpec) -> dict:
    """Write the figure and return the exact values that were drawn.

    The returned mapping groups plotted series by label so callers can
    verify data fidelity against the source file.
    """
    df = _load(spec)
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    drawn: dict = {}
    if spec.kind == "speed-traj":
        vid = spec.vehicle_id
        if vid is None:
            vid = int(df["vehicle_id"].min())
        sub = df[df["vehicle_id"] == vid]
        if sub.empty:
            raise SchemaError(f"no rows for vehicle {vid}")
        groups = sub.groupby("method") if "method" in sub.columns \
            else [("run", sub)]
        for label, g in groups:
            g = g.sort_values("time_s")
            ax.plot(g["time_s"], g["vx_mps"], label=str(label))
            drawn[str(label)] = list(g["vx_mps"])
        ax.set_xlabel("time (s)")
        ax.set_ylabel("speed (m/s)")
        ax.set_title(f"vehicle {vid} speed")
        ax.legend()
    elif spec.kind == "lateral-traj":
        for vid, g in df.groupby("vehicle_id"):
            g = g.sort_values("time_s")
            ax.plot(g["time_s"], g["y_m"], label=f"veh-{vid}")
            drawn[f"veh-{vid}"] = list(g["y_m"])
        ax.set_xlabel("time (s)")
        ax.set_ylabel("lateral position (m)")
        ax.set_title("lateral placement")
        ax.legend(fontsize="small", ncols=2)
    elif spec.kind == "interval-bars":
        methods = list(dict.fromkeys(df["method"]))
        intervals = sorted(df["interval"].unique())
        width = 0.8 / len(methods)
        for k, method in enumerate(methods):
            sub = df[df["method"] == method].set_index("interval")
            vals = [float(sub.loc[i, "v_avg_mps"]) if i in sub.index
                    else 0.0 for i in intervals]
            ax.bar([i + k * width for i in intervals], vals, width=width,
                   label=method)
            drawn[method] = vals
        ax.set_xlabel("5-minute interval")
        ax.set_ylabel("average speed (m/s)")
        ax.legend()
    elif spec.kind == "jerk-hist":
        methods = list(dict.fromkeys(df["method"]))
        width = 0.8 / len(methods)
        sample = df[df["method"] == methods[0]].sort_values("bin_low")
        labels = [f"[{lo:g},{hi:g})" for lo, hi in
                  zip(sample["bin_low"], sample["bin_high"])]
        for k, method in enumerate(methods):
            sub = df[df["method"] == method].sort_values("bin_low")
            vals = list(sub["pct"])
            ax.bar([i + k * width for i in range(len(vals))], vals,
                   width=width, label=method)
            drawn[method] = vals
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=45, fontsize="x-small")
        ax.set_ylabel("share of jerk samples (%)")
        ax.legend()
    fig.tight_layout()
    spec.output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.output)
    plt.close(fig)
    return drawn
