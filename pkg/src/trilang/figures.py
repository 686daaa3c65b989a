"""Figure rendering for precision and suite reports.

Charts are written next to a CSV of the same numbers, so the figures are a
view and the delimited file stays the machine-readable record. Rendering is
headless (Agg); nothing here ever opens a window.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

plt.rcParams["figure.figsize"] = (6.4, 3.6)
plt.rcParams["font.size"] = 9
plt.rcParams["axes.spines.top"] = False
plt.rcParams["axes.spines.right"] = False

_HOP_BUCKETS = ("0", "1", "2", "3+")


def _write_csv(path: Path, rows: list[list]) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        csv.writer(handle).writerows(rows)


def render_precision_figures(report, outdir: Union[str, Path]) -> list[Path]:
    """PNG charts plus precision.csv for one PrecisionReport."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    csv_path = outdir / "precision.csv"
    _write_csv(csv_path, report.csv_rows())
    written.append(csv_path)

    mechs = sorted(report.per_mechanism)
    static = [report.per_mechanism[m]["static"] for m in mechs]
    dynamic = [report.per_mechanism[m]["dynamic"] for m in mechs]
    spurious = [report.per_mechanism[m]["spurious"] for m in mechs]
    x = range(len(mechs))
    fig, ax = plt.subplots()
    width = 0.27
    ax.bar([i - width for i in x], static, width, label="static")
    ax.bar(list(x), dynamic, width, label="dynamic")
    ax.bar([i + width for i in x], spurious, width, label="spurious")
    ax.set_xticks(list(x))
    ax.set_xticklabels(mechs, rotation=20, ha="right")
    ax.set_ylabel("call edges")
    ax.set_title("Edges by mechanism")
    ax.legend()
    fig.tight_layout()
    path = outdir / "edges_by_mechanism.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots()
    ax.bar(_HOP_BUCKETS, [report.per_hop.get(b, 0) for b in _HOP_BUCKETS])
    ax.set_xlabel("boundary hops from entry to caller")
    ax.set_ylabel("spurious edges")
    ax.set_title("Spurious edges by hop depth")
    fig.tight_layout()
    path = outdir / "spurious_by_hop.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    return written


def render_suite_figures(report, outdir: Union[str, Path]) -> list[Path]:
    """Per-seed static/dynamic counts plus suite.csv for one SuiteReport."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    csv_path = outdir / "suite.csv"
    _write_csv(csv_path, report.csv_rows())
    written.append(csv_path)

    seeds = [r.seed for r in report.records]
    fig, ax = plt.subplots()
    ax.plot(seeds, [r.static_edges for r in report.records], label="static edges",
            linewidth=1)
    ax.plot(seeds, [r.dynamic_edges for r in report.records], label="dynamic edges",
            linewidth=1)
    violating = [r.seed for r in report.records if r.violated]
    if violating:
        ax.scatter(violating,
                   [r.dynamic_edges for r in report.records if r.violated],
                   color="red", marker="x", label="violation", zorder=3)
    ax.set_xlabel("seed")
    ax.set_ylabel("edges")
    ax.set_title("Soundness suite: edge counts per seed")
    ax.legend()
    fig.tight_layout()
    path = outdir / "suite_edges.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    return written
