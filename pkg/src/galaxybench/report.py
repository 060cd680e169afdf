"""Curve reports over harness artifacts: CSV, SVG and PNG outputs.

Reads the ``aggregate.csv`` files produced by a run or compare invocation,
applies the configured smoothing window, and emits the two benchmark
charts (test accuracy and per-class minimum queries, both against labels
acquired).  The SVG output is a single self-contained file with plain
polyline charts; the PNG figures are rendered with matplotlib.
"""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass

from .errors import MissingArtifacts
from .harness import smooth

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass
class StrategyCurves:
    strategy: str
    labels: list[int]
    mean_accuracy: list[float]
    mean_min_queries: list[float]


def _read_aggregate_csv(path: str, strategy: str) -> StrategyCurves:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return StrategyCurves(
        strategy=strategy,
        labels=[int(r["labels_acquired"]) for r in rows],
        mean_accuracy=[float(r["mean_accuracy"]) for r in rows],
        mean_min_queries=[float(r["mean_min_queries"]) for r in rows],
    )


def load_curves(indir: str) -> list[StrategyCurves]:
    """Aggregate curves from a run directory or a compare directory.

    A run directory holds ``aggregate.csv`` at its root; a compare
    directory holds one subdirectory per strategy.  Strategies are
    returned in sorted name order.
    """
    root_csv = os.path.join(indir, "aggregate.csv")
    if os.path.exists(root_csv):
        name = os.path.basename(os.path.normpath(indir))
        import json

        summary = os.path.join(indir, "summary.json")
        if os.path.exists(summary):
            with open(summary) as fh:
                name = json.load(fh).get("strategy", name)
        return [_read_aggregate_csv(root_csv, name)]
    found = []
    if os.path.isdir(indir):
        for entry in sorted(os.listdir(indir)):
            candidate = os.path.join(indir, entry, "aggregate.csv")
            if os.path.exists(candidate):
                found.append(_read_aggregate_csv(candidate, entry))
    if not found:
        raise MissingArtifacts(f"no aggregate.csv artifacts under {indir}")
    return found


# -- SVG ----------------------------------------------------------------------


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def _fmt(v: float) -> str:
    return f"{v:.4g}"


class _SvgChart:
    """One polyline chart drawn into an absolute region of the document."""

    WIDTH = 640
    HEIGHT = 300
    MARGIN_L = 70
    MARGIN_R = 150
    MARGIN_T = 34
    MARGIN_B = 46

    def __init__(self, title: str, x_label: str, y_label: str, y_top: float | None = None):
        self.title = title
        self.x_label = x_label
        self.y_label = y_label
        self.y_top = y_top
        self.series: list[tuple[str, list[float], list[float], str]] = []

    def add_series(self, name: str, xs, ys, color: str) -> None:
        self.series.append((name, [float(x) for x in xs], [float(y) for y in ys], color))

    def render(self, y_offset: int) -> list[str]:
        xs_all = [x for _, xs, _, _ in self.series for x in xs]
        ys_all = [y for _, _, ys, _ in self.series for y in ys]
        x_lo, x_hi = (min(xs_all), max(xs_all)) if xs_all else (0.0, 1.0)
        y_lo = 0.0
        y_hi = self.y_top if self.y_top is not None else (max(ys_all) if ys_all else 1.0)
        if y_hi <= y_lo:
            y_hi = y_lo + 1.0
        if x_hi <= x_lo:
            x_hi = x_lo + 1.0

        plot_w = self.WIDTH - self.MARGIN_L - self.MARGIN_R
        plot_h = self.HEIGHT - self.MARGIN_T - self.MARGIN_B
        x0, y0 = self.MARGIN_L, y_offset + self.MARGIN_T

        def sx(v):
            return x0 + (v - x_lo) / (x_hi - x_lo) * plot_w

        def sy(v):
            return y0 + plot_h - (v - y_lo) / (y_hi - y_lo) * plot_h

        parts = [f'<g font-family="sans-serif" font-size="12">']
        parts.append(
            f'<text x="{x0 + plot_w / 2:.1f}" y="{y_offset + 18}" text-anchor="middle" '
            f'font-size="14">{self.title}</text>'
        )
        # frame
        parts.append(
            f'<rect x="{x0}" y="{y0}" width="{plot_w}" height="{plot_h}" '
            f'fill="none" stroke="#333" stroke-width="1"/>'
        )
        for tick in _ticks(x_lo, x_hi):
            px = sx(tick)
            parts.append(
                f'<line x1="{px:.1f}" y1="{y0 + plot_h}" x2="{px:.1f}" '
                f'y2="{y0 + plot_h + 4}" stroke="#333"/>'
            )
            parts.append(
                f'<text x="{px:.1f}" y="{y0 + plot_h + 17}" text-anchor="middle">{_fmt(tick)}</text>'
            )
        for tick in _ticks(y_lo, y_hi):
            py = sy(tick)
            parts.append(f'<line x1="{x0 - 4}" y1="{py:.1f}" x2="{x0}" y2="{py:.1f}" stroke="#333"/>')
            parts.append(
                f'<text x="{x0 - 7}" y="{py + 4:.1f}" text-anchor="end">{_fmt(tick)}</text>'
            )
        parts.append(
            f'<text x="{x0 + plot_w / 2:.1f}" y="{y0 + plot_h + 36}" '
            f'text-anchor="middle">{self.x_label}</text>'
        )
        parts.append(
            f'<text x="{x0 - 52}" y="{y0 + plot_h / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 {x0 - 52} {y0 + plot_h / 2:.1f})">{self.y_label}</text>'
        )
        for name, xs, ys, color in self.series:
            points = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
            parts.append(
                f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>'
            )
        # legend
        lx = x0 + plot_w + 12
        for i, (name, _, _, color) in enumerate(self.series):
            ly = y0 + 10 + i * 18
            parts.append(
                f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" '
                f'stroke="{color}" stroke-width="2"/>'
            )
            parts.append(f'<text x="{lx + 24}" y="{ly + 4}">{name}</text>')
        parts.append("</g>")
        return parts


def render_svg(charts: list[_SvgChart]) -> str:
    height = _SvgChart.HEIGHT * len(charts)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SvgChart.WIDTH}" '
        f'height="{height}" viewBox="0 0 {_SvgChart.WIDTH} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    for i, chart in enumerate(charts):
        parts.extend(chart.render(i * _SvgChart.HEIGHT))
    parts.append("</svg>")
    return "\n".join(parts)


def _atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- PNG ----------------------------------------------------------------------


def render_png(curves: list[StrategyCurves], window: int, accuracy_png: str, minq_png: str) -> None:
    """Matplotlib renderings of the two smoothed benchmark charts."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    specs = [
        ("test accuracy", lambda c: smooth(c.mean_accuracy, window), accuracy_png),
        ("per-class min queries", lambda c: smooth(c.mean_min_queries, window), minq_png),
    ]
    for metric, extract, path in specs:
        fig, ax = plt.subplots(figsize=(7, 4.2))
        for i, c in enumerate(curves):
            ax.plot(c.labels, extract(c), label=c.strategy, color=PALETTE[i % len(PALETTE)])
        ax.set_xlabel("labels acquired")
        ax.set_ylabel(metric)
        ax.legend()
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        fig.savefig(path, dpi=120)
        plt.close(fig)


# -- assembly -----------------------------------------------------------------


def write_report(
    indir: str,
    csv_path: str,
    svg_path: str,
    window: int,
    png: bool = True,
) -> list[str]:
    """Emit smoothed curve CSV, SVG charts and PNG figures; returns paths."""
    curves = load_curves(indir)
    written = []

    def _write_csv(fh):
        writer = csv.writer(fh)
        writer.writerow(["strategy", "labels_acquired", "smoothed_accuracy", "smoothed_min_queries"])
        for c in curves:
            acc = smooth(c.mean_accuracy, window)
            minq = smooth(c.mean_min_queries, window)
            for i in range(len(c.labels)):
                writer.writerow([c.strategy, c.labels[i], repr(acc[i]), repr(minq[i])])

    directory = os.path.dirname(os.path.abspath(csv_path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            _write_csv(fh)
        os.replace(tmp, csv_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    written.append(csv_path)

    acc_chart = _SvgChart(
        "Test accuracy vs. labels acquired", "labels acquired", "test accuracy", y_top=1.0
    )
    minq_chart = _SvgChart(
        "Per-class minimum queries vs. labels acquired", "labels acquired", "per-class min queries"
    )
    for i, c in enumerate(curves):
        color = PALETTE[i % len(PALETTE)]
        acc_chart.add_series(c.strategy, c.labels, smooth(c.mean_accuracy, window), color)
        minq_chart.add_series(c.strategy, c.labels, smooth(c.mean_min_queries, window), color)
    _atomic_write_text(svg_path, render_svg([acc_chart, minq_chart]))
    written.append(svg_path)

    if png:
        stem, _ = os.path.splitext(svg_path)
        accuracy_png = f"{stem}_accuracy.png"
        minq_png = f"{stem}_min_queries.png"
        render_png(curves, window, accuracy_png, minq_png)
        written.extend([accuracy_png, minq_png])
    return written
