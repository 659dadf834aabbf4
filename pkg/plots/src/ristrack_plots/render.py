"""Render the four benchmark figures from a harness results CSV.

The CSV schema is the experiment harness contract: one row per
(run, slot, algorithm) with NMSE values already in dB.  Rendering only
aggregates and scales axes; it never transforms the recorded data.
"""

from __future__ import annotations

import csv
import warnings
from collections import defaultdict
from dataclasses import dataclass
from statistics import mean, median

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

FIGURE_IDS = ("snr", "convergence", "runtime", "pilots")

REQUIRED_COLUMNS = (
    "figure_id",
    "run_index",
    "slot",
    "algorithm",
    "param_name",
    "param_value",
    "nmse_gz_db",
    "nmse_h_db",
    "runtime_ms",
    "seed",
    "diverged",
)

_AXis_LABELS = {
    "snr": ("SNR (dB)", "NMSE (dB)"),
    "convergence": ("slot", "NMSE (dB)"),
    "runtime": ("RIS elements", "runtime per slot (ms)"),
    "pilots": ("pilot length", "NMSE of H (dB)"),
}


class SchemaError(ValueError):
    """The CSV is missing a required column."""

    def __init__(self, column):
        super().__init__(f"results CSV is missing required column {column!r}")
        self.column = column


@dataclass
class PlotJob:
    csv_path: str
    figure_id: str
    output_path: str
    log_y: bool | None = None  # None: log scale for the runtime figure only

    def __post_init__(self):
        if self.figure_id not in FIGURE_IDS:
            raise ValueError(f"figure_id must be one of {FIGURE_IDS}, got {self.figure_id!r}")


def load_rows(csv_path) -> list[dict]:
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for column in REQUIRED_COLUMNS:
            if column not in header:
                raise SchemaError(column)
        return list(reader)


def _usable(rows, metric):
    out = []
    for row in rows:
        if row["diverged"] == "true" or not row[metric]:
            continue
        out.append(row)
    return out


def _series(rows, metric, x_of, reduce=mean, split_on_param=False):
    """Group rows into labelled (x, y) series, one per algorithm (and per
    swept value when requested and more than one is present)."""
    params = sorted({r["param_value"] for r in rows})
    split = split_on_param and len(params) > 1
    groups = defaultdict(lambda: defaultdict(list))
    for row in rows:
        label = row["algorithm"]
        if split:
            label = f"{row['algorithm']} ({row['param_name']}={row['param_value']})"
        groups[label][x_of(row)].append(float(row[metric]))
    series = {}
    for label, by_x in sorted(groups.items()):
        xs = sorted(by_x)
        series[label] = (xs, [reduce(by_x[x]) for x in xs])
    return series


def render(job: PlotJob):
    """Render one figure and write it to job.output_path.  Returns the figure."""
    rows = load_rows(job.csv_path)

    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    xlabel, ylabel = _AXis_LABELS[job.figure_id]

    if job.figure_id == "snr":
        series = _series(_usable(rows, "nmse_gz_db"), "nmse_gz_db",
                         lambda r: float(r["param_value"]))
    elif job.figure_id == "convergence":
        series = _series(_usable(rows, "nmse_gz_db"), "nmse_gz_db",
                         lambda r: int(r["slot"]), split_on_param=True)
    elif job.figure_id == "runtime":
        series = _series(_usable(rows, "runtime_ms"), "runtime_ms",
                         lambda r: float(r["param_value"]), reduce=median)
    else:
        series = _series(_usable(rows, "nmse_h_db"), "nmse_h_db",
                         lambda r: float(r["param_value"]))

    if not series:
        warnings.warn(f"no plottable rows in {job.csv_path}", RuntimeWarning)
        ax.text(0.5, 0.5, "no data", ha="center", va="center", transform=ax.transAxes)
    for label, (xs, ys) in series.items():
        ax.plot(xs, ys, marker="o", label=label)

    log_y = job.log_y if job.log_y is not None else job.figure_id == "runtime"
    if log_y and series:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.4)
    if series:
        ax.legend()
    fig.tight_layout()
    fig.savefig(job.output_path, dpi=150)
    plt.close(fig)
    return fig
