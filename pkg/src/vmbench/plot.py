"""Hand-written SVG figures from a benchmark report.

fig2 / fig3: train / test accuracy against NIF, one panel per pairing.
fig4a / fig4b: cumulative test-accuracy plots for gradient boosting / NN.
fig4c: MDAR against NIF for the two nonlinear pairings.
NIF axes are logarithmic. Multiple seeds are averaged per (imputer, NIF).
"""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path
from xml.sax.saxutils import escape

from .bench.report import (BenchmarkReport, MissingTraces, ReportError, accuracy_vs_nif, cumulative_accuracy,
                           mdar_vs_nif)

FIGURES = ("fig2", "fig3", "fig4a", "fig4b", "fig4c")
PALETTE = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2")

PANEL_W, PANEL_H = 320, 240
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 56, 16, 28, 44


class UnknownFigure(ReportError):
    pass


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    return ticks


def _log_ticks(lo: float, hi: float) -> list[float]:
    ticks = []
    for e in range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1):
        for m in (1, 2, 5):
            v = m * 10 ** e
            if lo <= v <= hi:
                ticks.append(v)
    return ticks or [lo, hi]


def _fmt(v: float) -> str:
    return f"{v:.6g}"


class _Panel:
    def __init__(self, title, xlabel, ylabel, xlog, series, x0, y0):
        self.title, self.xlabel, self.ylabel, self.xlog = title, xlabel, ylabel, xlog
        self.series = series  # list of (name, [(x, y), ...])
        self.x0, self.y0 = x0, y0
        xs = [x for _, pts in series for x, _ in pts]
        ys = [y for _, pts in series for _, y in pts]
        self.xmin, self.xmax = min(xs), max(xs)
        self.ymin, self.ymax = min(ys), max(ys)
        if self.xmax == self.xmin:
            self.xmin, self.xmax = (self.xmin / 2, self.xmax * 2) if xlog else (self.xmin - 0.5, self.xmax + 0.5)
        if self.ymax == self.ymin:
            self.ymin, self.ymax = self.ymin - 0.05, self.ymax + 0.05
        pad = 0.04 * (self.ymax - self.ymin)
        self.ymin -= pad
        self.ymax += pad

    def _tx(self, x):
        w = PANEL_W - MARGIN_L - MARGIN_R
        if self.xlog:
            f = (math.log10(x) - math.log10(self.xmin)) / (math.log10(self.xmax) - math.log10(self.xmin))
        else:
            f = (x - self.xmin) / (self.xmax - self.xmin)
        return self.x0 + MARGIN_L + f * w

    def _ty(self, y):
        h = PANEL_H - MARGIN_T - MARGIN_B
        return self.y0 + MARGIN_T + (1 - (y - self.ymin) / (self.ymax - self.ymin)) * h

    def svg(self, colors) -> str:
        left, right = self.x0 + MARGIN_L, self.x0 + PANEL_W - MARGIN_R
        top, bottom = self.y0 + MARGIN_T, self.y0 + PANEL_H - MARGIN_B
        scale = "log" if self.xlog else "linear"
        out = [f'<g class="panel" data-title="{escape(self.title)}" data-xscale="{scale}">',
               f'<text x="{_fmt((left + right) / 2)}" y="{_fmt(self.y0 + 18)}" text-anchor="middle" '
               f'font-size="13">{escape(self.title)}</text>',
               f'<rect class="frame" x="{_fmt(left)}" y="{_fmt(top)}" width="{_fmt(right - left)}" '
               f'height="{_fmt(bottom - top)}" fill="none" stroke="#444"/>']
        xt = _log_ticks(self.xmin, self.xmax) if self.xlog else _nice_ticks(self.xmin, self.xmax)
        out.append(f'<g class="axis x-axis" data-scale="{scale}">')
        for t in xt:
            x = self._tx(t)
            out.append(f'<line x1="{_fmt(x)}" y1="{_fmt(bottom)}" x2="{_fmt(x)}" y2="{_fmt(bottom + 4)}" stroke="#444"/>'
                       f'<text x="{_fmt(x)}" y="{_fmt(bottom + 16)}" text-anchor="middle" font-size="10">{_fmt(t)}</text>')
        out.append(f'<text x="{_fmt((left + right) / 2)}" y="{_fmt(bottom + 34)}" text-anchor="middle" '
                   f'font-size="11">{escape(self.xlabel)}</text></g>')
        out.append('<g class="axis y-axis" data-scale="linear">')
        for t in _nice_ticks(self.ymin, self.ymax):
            y = self._ty(t)
            out.append(f'<line x1="{_fmt(left - 4)}" y1="{_fmt(y)}" x2="{_fmt(left)}" y2="{_fmt(y)}" stroke="#444"/>'
                       f'<text x="{_fmt(left - 6)}" y="{_fmt(y + 3)}" text-anchor="end" font-size="10">{_fmt(t)}</text>')
        cy = (top + bottom) / 2
        out.append(f'<text x="{_fmt(self.x0 + 14)}" y="{_fmt(cy)}" text-anchor="middle" font-size="11" '
                   f'transform="rotate(-90 {_fmt(self.x0 + 14)} {_fmt(cy)})">{escape(self.ylabel)}</text></g>')
        for name, pts in self.series:
            coords = " ".join(f"{_fmt(self._tx(x))},{_fmt(self._ty(y))}" for x, y in pts)
            out.append(f'<polyline class="series" data-series="{escape(name)}" points="{coords}" '
                       f'fill="none" stroke="{colors[name]}" stroke-width="1.5"/>')
        out.append("</g>")
        return "\n".join(out)


def _mean_curves(rows, group_key, value_key) -> dict:
    """{panel: {imputer: [(nif, mean value), ...] sorted by nif}}."""
    acc = defaultdict(lambda: defaultdict(lambda: defaultdict(list)))
    for r in rows:
        acc[r[group_key]][r["imputer"]][r["nif"]].append(r[value_key])
    return {p: {imp: sorted((nif, sum(v) / len(v)) for nif, v in by.items()) for imp, by in d.items()}
            for p, d in acc.items()}


def _document(panels: list[_Panel], names: list[str], colors: dict, figure: str) -> str:
    cols = min(3, len(panels))
    rows = math.ceil(len(panels) / cols)
    legend_h = 24
    width = cols * PANEL_W
    height = rows * PANEL_H + legend_h
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" data-figure="{figure}">',
           '<rect width="100%" height="100%" fill="white"/>']
    out.extend(p.svg(colors) for p in panels)
    out.append('<g class="legend">')
    for i, name in enumerate(names):
        x = 10 + i * 120
        y = rows * PANEL_H + 14
        out.append(f'<line x1="{x}" y1="{y}" x2="{x + 18}" y2="{y}" stroke="{colors[name]}" stroke-width="2"/>'
                   f'<text x="{x + 22}" y="{y + 4}" font-size="11">{escape(name)}</text>')
    out.append("</g>\n</svg>\n")
    return "\n".join(out)


def _layout(specs) -> list[_Panel]:
    panels = []
    cols = min(3, len(specs))
    for i, (title, xlabel, ylabel, xlog, series) in enumerate(specs):
        panels.append(_Panel(title, xlabel, ylabel, xlog, series, (i % cols) * PANEL_W, (i // cols) * PANEL_H))
    return panels


def render(report: BenchmarkReport, figure: str) -> str:
    if figure not in FIGURES:
        raise UnknownFigure(f"unknown figure {figure!r}; expected one of {', '.join(FIGURES)}")
    if not report.runs:
        raise MissingTraces("report has no traces")
    imputers = report.imputer_kinds
    colors = {name: PALETTE[i % len(PALETTE)] for i, name in enumerate(imputers)}
    specs = []
    if figure in ("fig2", "fig3"):
        split = "train" if figure == "fig2" else "test"
        curves = _mean_curves(accuracy_vs_nif(report, split), "pairing", "accuracy")
        for reg in report.config.regressors:
            if reg in curves:
                series = [(imp, curves[reg][imp]) for imp in imputers if imp in curves[reg]]
                specs.append((reg, "NIF", f"{split} accuracy", True, series))
    elif figure in ("fig4a", "fig4b"):
        pairing = "gradient_boosting" if figure == "fig4a" else "neural_network"
        if not any(k[1] == pairing for k in report.runs):
            raise MissingTraces(f"no {pairing} traces in report")
        rows = cumulative_accuracy(report, pairing)
        series = []
        for imp in imputers:
            pts = [(r["accuracy"], r["cumulative_fraction"]) for r in rows if r["imputer"] == imp]
            if pts:
                series.append((imp, pts))
        specs.append((pairing, "test accuracy", "cumulative fraction", False, series))
    else:
        curves = _mean_curves(mdar_vs_nif(report), "pairing", "mdar")
        for reg in ("gradient_boosting", "neural_network"):
            if reg in curves:
                series = [(imp, curves[reg][imp]) for imp in imputers if imp in curves[reg]]
                specs.append((reg, "NIF", "MDAR", True, series))
    if not specs:
        raise MissingTraces(f"no traces for {figure}")
    present = [imp for imp in imputers if any(name == imp for s in specs for name, _ in s[4])]
    return _document(_layout(specs), present, colors, figure)


def plot(report: BenchmarkReport, figure: str, out_file: str | Path) -> Path:
    svg = render(report, figure)
    out = Path(out_file)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg, encoding="utf-8")
    return out
