"""CSV and SVG emission.

Numbers are written as the shortest decimal that round-trips (Python float
repr), so files are byte-stable across runs and platforms.  The SVG line
charts are generated directly from the arrays with no plotting dependency
and no timestamps, for the same reason.
"""
from __future__ import annotations

import numpy as np

__all__ = ["fmt", "write_csv", "field_rows", "svg_line_chart"]


def fmt(v) -> str:
    return repr(float(v))


def write_csv(path, header: str, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def field_rows(times, grid_x, fields):
    """Rows for the field schema t,x,rho1_mean,rho1_se,rho2_mean,rho2_se.

    ``fields[s]`` is a (4, M) array: mean1, se1, mean2, se2 at snapshot s.
    """
    for t, block in zip(times, fields):
        m1, s1, m2, s2 = block
        for j in range(grid_x.size):
            yield (fmt(t), fmt(grid_x[j]), fmt(m1[j]), fmt(s1[j]), fmt(m2[j]), fmt(s2[j]))


def _svg_path(xs, ys, x0, y0, w, h, xmin, xmax, ymin, ymax):
    span_x = (xmax - xmin) or 1.0
    span_y = (ymax - ymin) or 1.0
    pts = []
    for x, y in zip(xs, ys):
        px = x0 + (x - xmin) / span_x * w
        py = y0 + h - (y - ymin) / span_y * h
        pts.append(f"{px:.2f},{py:.2f}")
    return " ".join(pts)


def svg_line_chart(path, xs, series: dict, title: str, xlabel: str, ylabel: str,
                   log_log: bool = False):
    """Minimal multi-series line chart; series maps label -> y array."""
    xs = np.asarray(xs, dtype=float)
    if log_log:
        xs = np.log10(xs)
        series = {k: np.log10(np.maximum(np.asarray(v, float), 1e-300))
                  for k, v in series.items()}
    width, height, x0, y0 = 640, 400, 70, 40
    w, h = width - x0 - 30, height - y0 - 60
    ally = np.concatenate([np.asarray(v, float) for v in series.values()])
    xmin, xmax = float(xs.min()), float(xs.max())
    ymin, ymax = float(ally.min()), float(ally.max())
    pad = 0.05 * ((ymax - ymin) or 1.0)
    ymin, ymax = ymin - pad, ymax + pad
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width/2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{width/2:.0f}" y="{height-8}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="16" y="{height/2:.0f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {height/2:.0f})">{ylabel}</text>',
        f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="black"/>',
    ]
    for i in range(5):
        fx = xmin + (xmax - xmin) * i / 4
        fy = ymin + (ymax - ymin) * i / 4
        px = x0 + w * i / 4
        py = y0 + h - h * i / 4
        parts.append(f'<line x1="{px:.1f}" y1="{y0+h}" x2="{px:.1f}" y2="{y0+h+4}" stroke="black"/>')
        parts.append(f'<text x="{px:.1f}" y="{y0+h+18}" text-anchor="middle" font-size="10">{fx:.4g}</text>')
        parts.append(f'<line x1="{x0-4}" y1="{py:.1f}" x2="{x0}" y2="{py:.1f}" stroke="black"/>')
        parts.append(f'<text x="{x0-8}" y="{py+3:.1f}" text-anchor="end" font-size="10">{fy:.4g}</text>')
    for i, (label, ys) in enumerate(series.items()):
        color = colors[i % len(colors)]
        pts = _svg_path(xs, np.asarray(ys, float), x0, y0, w, h, xmin, xmax, ymin, ymax)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{x0+8}" y="{y0+16+14*i}" font-size="11" fill="{color}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
