"""Deterministic SVG emission: fixed canvas, no timestamps, stable formatting.

Two table kinds are rendered: "line" (polyline through the points) and
"staircase" (step function, for gap-growth tables).  Identical input tables
produce byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import SchemaError

CANVAS_W = 640.0
CANVAS_H = 480.0
MARGIN = 60.0


@dataclass(frozen=True)
class PlotTable:
    name: str
    xs: tuple
    ys: tuple
    kind: str = "line"
    x_label: str = "x"
    y_label: str = "y"

    def __post_init__(self):
        if len(self.xs) != len(self.ys) or len(self.xs) == 0:
            raise SchemaError("plot table must have matching nonempty columns")
        if self.kind not in ("line", "staircase"):
            raise SchemaError(f"unknown plot kind {self.kind!r}")


def _fmt(x: float) -> str:
    return format(float(x), ".6g")


def _scale(values, lo_pix: float, hi_pix: float):
    vmin = min(values)
    vmax = max(values)
    span = vmax - vmin
    if span == 0.0:
        span = 1.0
        vmin -= 0.5
    def to_pix(v):
        return lo_pix + (v - vmin) * (hi_pix - lo_pix) / span
    return to_pix, vmin, vmax


def render_svg(table: PlotTable) -> str:
    to_x, xmin, xmax = _scale(table.xs, MARGIN, CANVAS_W - MARGIN)
    to_y, ymin, ymax = _scale(table.ys, CANVAS_H - MARGIN, MARGIN)
    pts = []
    if table.kind == "line":
        for x, y in zip(table.xs, table.ys):
            pts.append(f"{_fmt(to_x(x))},{_fmt(to_y(y))}")
    else:
        prev_y = None
        for x, y in zip(table.xs, table.ys):
            if prev_y is not None:
                pts.append(f"{_fmt(to_x(x))},{_fmt(to_y(prev_y))}")
            pts.append(f"{_fmt(to_x(x))},{_fmt(to_y(y))}")
            prev_y = y
    polyline = " ".join(pts)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(CANVAS_W)}" '
        f'height="{int(CANVAS_H)}" viewBox="0 0 {int(CANVAS_W)} {int(CANVAS_H)}">',
        f'<rect x="0" y="0" width="{int(CANVAS_W)}" height="{int(CANVAS_H)}" fill="white"/>',
        f'<line x1="{_fmt(MARGIN)}" y1="{_fmt(CANVAS_H - MARGIN)}" '
        f'x2="{_fmt(CANVAS_W - MARGIN)}" y2="{_fmt(CANVAS_H - MARGIN)}" stroke="black"/>',
        f'<line x1="{_fmt(MARGIN)}" y1="{_fmt(CANVAS_H - MARGIN)}" '
        f'x2="{_fmt(MARGIN)}" y2="{_fmt(MARGIN)}" stroke="black"/>',
        f'<text x="{_fmt(CANVAS_W / 2)}" y="{_fmt(CANVAS_H - 20.0)}" '
        f'text-anchor="middle" font-size="14">{table.x_label} '
        f'[{_fmt(xmin)}, {_fmt(xmax)}]</text>',
        f'<text x="20" y="{_fmt(CANVAS_H / 2)}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 20 {_fmt(CANVAS_H / 2)})">{table.y_label} '
        f'[{_fmt(ymin)}, {_fmt(ymax)}]</text>',
        f'<text x="{_fmt(CANVAS_W / 2)}" y="30" text-anchor="middle" '
        f'font-size="16">{table.name}</text>',
        f'<polyline fill="none" stroke="navy" stroke-width="1.5" points="{polyline}"/>',
        "</svg>",
    ]
    return "\n".join(lines) + "\n"


def emit_plots(tables: list[PlotTable], out_dir) -> list[Path]:
    """Write one SVG per table into out_dir; returns the paths."""
    if not tables:
        raise SchemaError("no tables to plot")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for table in tables:
        path = out / f"{table.name}.svg"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(render_svg(table))
        paths.append(path)
    return paths
