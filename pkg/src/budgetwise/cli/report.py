"""Risk-curve plots from simulation CSVs: native SVG or a gnuplot script."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

from ..simkit import CSV_HEADER, THEORY

WIDTH, HEIGHT = 800, 600
LEFT, RIGHT, TOP, BOTTOM = 80, 170, 40, 60
LOG_RATIO = 50.0
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


class CsvFormatError(Exception):
    """Raised with the 1-based line number of the first bad row."""


@dataclass
class Series:
    method: str
    budgets: list[float] = field(default_factory=list)
    risks: list[float] = field(default_factory=list)
    ses: list[float | None] = field(default_factory=list)


def _number(text: str, row: int, name: str, allow_empty: bool) -> float | None:
    if text == "":
        if allow_empty:
            return None
        raise CsvFormatError(f"row {row}: column {name} is empty")
    try:
        value = float(text)
    except ValueError:
        raise CsvFormatError(f"row {row}: column {name} is not a number: {text!r}") from None
    if math.isnan(value):
        raise CsvFormatError(f"row {row}: column {name} is NaN")
    return value


def read_curves(path) -> list[Series]:
    """Series in first-appearance order; rows with an empty mean_risk are skipped."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise CsvFormatError(f"row 1: header must be {','.join(CSV_HEADER)}")
    series: dict[str, Series] = {}
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise CsvFormatError(f"row {line}: expected {len(CSV_HEADER)} fields, got {len(row)}")
        rec = dict(zip(CSV_HEADER, row))
        if not rec["method"]:
            raise CsvFormatError(f"row {line}: column method is empty")
        budget = _number(rec["budget"], line, "budget", False)
        risk = _number(rec["mean_risk"], line, "mean_risk", True)
        se = _number(rec["se"], line, "se", True)
        try:
            int(rec["replications"])
        except ValueError:
            raise CsvFormatError(f"row {line}: column replications is not an integer") from None
        s = series.setdefault(rec["method"], Series(rec["method"]))
        if risk is None:
            continue
        s.budgets.append(budget)
        s.risks.append(risk)
        s.ses.append(se)
    for s in series.values():
        order = sorted(range(len(s.budgets)), key=s.budgets.__getitem__)
        s.budgets = [s.budgets[i] for i in order]
        s.risks = [s.risks[i] for i in order]
        s.ses = [s.ses[i] for i in order]
    return list(series.values())


def _band(s: Series, i: int) -> tuple[float, float]:
    se = s.ses[i] or 0.0
    return s.risks[i] - 2 * se, s.risks[i] + 2 * se


def use_log_scale(series: list[Series]) -> bool:
    values = [r for s in series for r in s.risks if r > 0]
    return bool(values) and max(values) / min(values) > LOG_RATIO


class _Axes:
    def __init__(self, series: list[Series]):
        budgets = [b for s in series for b in s.budgets]
        lows, highs = [], []
        for s in series:
            for i in range(len(s.risks)):
                lo, hi = _band(s, i)
                lows.append(lo)
                highs.append(hi)
        self.log = use_log_scale(series)
        if not budgets:
            budgets, lows, highs = [0.0, 1.0], [0.0], [1.0]
        self.x0, self.x1 = min(budgets), max(budgets)
        if self.x0 == self.x1:
            self.x0, self.x1 = self.x0 - 1, self.x1 + 1
        if self.log:
            positive = [r for s in series for r in s.risks if r > 0]
            floor = min(positive) / 2
            self.floor = floor
            self.y0 = math.log10(floor)
            self.y1 = math.log10(max(max(highs), floor * 10))
        else:
            self.floor = None
            self.y0, self.y1 = min(0.0, min(lows)), max(highs)
        if self.y0 == self.y1:
            self.y0, self.y1 = self.y0 - 1, self.y1 + 1

    def x(self, b: float) -> float:
        return LEFT + (b - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)

    def y(self, r: float) -> float:
        if self.log:
            r = math.log10(max(r, self.floor))
        return HEIGHT - BOTTOM - (r - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)

    def yticks(self) -> list[tuple[float, str]]:
        if self.log:
            lo, hi = math.floor(self.y0), math.ceil(self.y1)
            return [(10.0**e, f"1e{e}") for e in range(lo, hi + 1) if self.y0 <= e <= self.y1]
        step = (self.y1 - self.y0) / 5
        return [(self.y0 + i * step, f"{self.y0 + i * step:.3g}") for i in range(6)]

    def xticks(self) -> list[tuple[float, str]]:
        step = (self.x1 - self.x0) / 5
        return [(self.x0 + i * step, f"{self.x0 + i * step:.4g}") for i in range(6)]


def _f(v: float) -> str:
    return f"{v:.2f}"


def render_svg(series: list[Series], title: str = "") -> str:
    ax = _Axes(series)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    x_lo, x_hi = LEFT, WIDTH - RIGHT
    y_lo, y_hi = HEIGHT - BOTTOM, TOP
    out.append(f'<rect x="{x_lo}" y="{y_hi}" width="{x_hi - x_lo}" height="{y_lo - y_hi}" '
               'fill="none" stroke="black"/>')
    for value, label in ax.yticks():
        y = _f(ax.y(value))
        out.append(f'<line x1="{x_lo - 5}" y1="{y}" x2="{x_lo}" y2="{y}" stroke="black"/>')
        out.append(f'<text x="{x_lo - 8}" y="{y}" text-anchor="end" dominant-baseline="middle">{label}</text>')
    for value, label in ax.xticks():
        x = _f(ax.x(value))
        out.append(f'<line x1="{x}" y1="{y_lo}" x2="{x}" y2="{y_lo + 5}" stroke="black"/>')
        out.append(f'<text x="{x}" y="{y_lo + 20}" text-anchor="middle">{label}</text>')
    out.append(f'<text x="{(x_lo + x_hi) / 2}" y="{HEIGHT - 15}" text-anchor="middle">budget</text>')
    y_label = "risk (log scale)" if ax.log else "risk"
    out.append(f'<text x="20" y="{(y_lo + y_hi) / 2}" text-anchor="middle" '
               f'transform="rotate(-90 20 {(y_lo + y_hi) / 2})">{y_label}</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>')

    for idx, s in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        method = escape(s.method)
        out.append(f'<g class="series" data-method="{method}">')
        has_band = len(s.risks) > 1 and any(se for se in s.ses)
        if has_band:
            upper = [(ax.x(b), ax.y(_band(s, i)[1])) for i, b in enumerate(s.budgets)]
            lower = [(ax.x(b), ax.y(_band(s, i)[0])) for i, b in enumerate(s.budgets)]
            pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in upper + lower[::-1])
            out.append(f'<polygon class="band" points="{pts}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        pts = " ".join(f"{_f(ax.x(b))},{_f(ax.y(r))}" for b, r in zip(s.budgets, s.risks))
        dash = ' stroke-dasharray="6,4"' if s.method == THEORY else ""
        if len(s.risks) > 1:
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"{dash}/>')
        for b, r in zip(s.budgets, s.risks):
            out.append(f'<circle cx="{_f(ax.x(b))}" cy="{_f(ax.y(r))}" r="2.5" fill="{color}"/>')
        out.append("</g>")
        ly = TOP + 10 + 20 * idx
        lx = WIDTH - RIGHT + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 25}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text class="legend" x="{lx + 32}" y="{ly}" dominant-baseline="middle">{method}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_gnuplot(series: list[Series], svg_name: str = "risk.svg", title: str = "") -> str:
    """Self-contained gnuplot script with inline data blocks."""
    lines = [
        f"set terminal svg size {WIDTH},{HEIGHT}",
        f"set output '{svg_name}'",
        "set xlabel 'budget'",
        "set ylabel 'risk'",
        "set key outside right",
    ]
    if title:
        lines.append(f"set title '{title}'")
    if use_log_scale(series):
        lines.append("set logscale y")
    plots = []
    for idx, s in enumerate(series):
        block = f"$d{idx}"
        lines.append(f"{block} << EOD")
        for i, (b, r) in enumerate(zip(s.budgets, s.risks)):
            lo, hi = _band(s, i)
            lines.append(f"{b!r} {r!r} {lo!r} {hi!r}")
        lines.append("EOD")
        color = PALETTE[idx % len(PALETTE)]
        dash = " dt 2" if s.method == THEORY else ""
        if len(s.risks) > 1 and any(s.ses):
            plots.append(f"{block} using 1:3:4 with filledcurves fc rgb '{color}' "
                         "fs transparent solid 0.2 notitle")
        plots.append(f"{block} using 1:2 with linespoints lc rgb '{color}'{dash} title '{s.method}'")
    lines.append("plot " + ", \\\n     ".join(plots) if plots else "plot NaN notitle")
    return "\n".join(lines) + "\n"
