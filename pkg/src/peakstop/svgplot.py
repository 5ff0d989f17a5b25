"""Deterministic SVG emitters for reports.

Hand-rolled fixed-canvas, fixed-palette SVG so identical inputs produce
byte-identical files that can be diffed in CI.  No timestamps, no generated
ids, floats formatted with a fixed precision.
"""

from __future__ import annotations

import math

WIDTH = 640
HEIGHT = 420
MARGIN = 56


def _fmt(x: float) -> str:
    return f"{x:.4f}".rstrip("0").rstrip(".")


def _header() -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
    ]


def _text(x, y, s, size=12, anchor="middle") -> str:
    return (
        f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-family="monospace" '
        f'font-size="{size}" text-anchor="{anchor}" fill="#222222">{s}</text>'
    )


def _blue_red(t: float) -> str:
    t = min(max(t, 0.0), 1.0)
    r = int(round(40 + 215 * t))
    g = int(round(60 + 40 * (1 - abs(2 * t - 1))))
    b = int(round(255 - 215 * t))
    return f"#{r:02x}{g:02x}{b:02x}"


def value_heatmap(entries: dict, path: str, title: str = "value function") -> None:
    """Heat map of a (n, z) -> value table."""
    ns = sorted({n for n, _ in entries})
    zs = sorted({z for _, z in entries})
    vals = [float(v) for v in entries.values()]
    lo, hi = min(vals), max(vals)
    span = (hi - lo) or 1.0
    cw = (WIDTH - 2 * MARGIN) / max(len(ns), 1)
    ch = (HEIGHT - 2 * MARGIN) / max(len(zs), 1)
    parts = _header()
    parts.append(_text(WIDTH / 2, MARGIN / 2, title, size=14))
    for (n, z), v in sorted(entries.items()):
        i, j = ns.index(n), zs.index(z)
        x = MARGIN + i * cw
        y = HEIGHT - MARGIN - (j + 1) * ch
        parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(cw)}" height="{_fmt(ch)}" '
            f'fill="{_blue_red((float(v) - lo) / span)}"/>'
        )
    parts.append(_text(WIDTH / 2, HEIGHT - MARGIN / 4, "n (time)"))
    parts.append(_text(MARGIN / 4, HEIGHT / 2, "z", anchor="middle"))
    parts.append("</svg>")
    _write(path, parts)


def stop_region_raster(stop_region, V_keys, path: str) -> None:
    """Raster of stop (red) vs continue (blue) over the reachable (n, z) states."""
    ns = sorted({n for n, _ in V_keys})
    zs = sorted({z for _, z in V_keys})
    cw = (WIDTH - 2 * MARGIN) / max(len(ns), 1)
    ch = (HEIGHT - 2 * MARGIN) / max(len(zs), 1)
    parts = _header()
    parts.append(_text(WIDTH / 2, MARGIN / 2, "stop region", size=14))
    for (n, z) in sorted(V_keys):
        i, j = ns.index(n), zs.index(z)
        x = MARGIN + i * cw
        y = HEIGHT - MARGIN - (j + 1) * ch
        color = "#d62728" if (n, z) in stop_region else "#1f77b4"
        parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(cw)}" height="{_fmt(ch)}" '
            f'fill="{color}" stroke="#ffffff" stroke-width="0.5"/>'
        )
    parts.append(_text(WIDTH / 2, HEIGHT - MARGIN / 4, "n (time)"))
    parts.append(_text(MARGIN / 4, HEIGHT / 2, "z"))
    parts.append("</svg>")
    _write(path, parts)


def ci_bars(rows, path: str, title: str = "paired differences vs designated rule") -> None:
    """One bar (mean paired difference) with a 95% whisker per rule."""
    if not rows:
        rows = []
    means = [r["mean_diff"] for r in rows]
    halfw = [1.96 * r["se_diff"] for r in rows]
    lo = min((m - h for m, h in zip(means, halfw)), default=-1.0)
    hi = max((m + h for m, h in zip(means, halfw)), default=1.0)
    lo, hi = min(lo, 0.0), max(hi, 0.0)
    span = (hi - lo) or 1.0

    def ypix(v):
        return HEIGHT - MARGIN - (v - lo) / span * (HEIGHT - 2 * MARGIN)

    bw = (WIDTH - 2 * MARGIN) / max(len(rows), 1)
    parts = _header()
    parts.append(_text(WIDTH / 2, MARGIN / 2, title, size=14))
    parts.append(
        f'<line x1="{MARGIN}" y1="{_fmt(ypix(0.0))}" x2="{WIDTH - MARGIN}" '
        f'y2="{_fmt(ypix(0.0))}" stroke="#888888" stroke-dasharray="4,3"/>'
    )
    for i, r in enumerate(rows):
        xc = MARGIN + (i + 0.5) * bw
        y0, y1 = ypix(0.0), ypix(r["mean_diff"])
        top, bot = min(y0, y1), max(y0, y1)
        color = "#d62728" if r.get("beaten") else "#1f77b4"
        parts.append(
            f'<rect x="{_fmt(xc - 0.3 * bw)}" y="{_fmt(top)}" width="{_fmt(0.6 * bw)}" '
            f'height="{_fmt(max(bot - top, 0.5))}" fill="{color}" fill-opacity="0.6"/>'
        )
        wy0 = ypix(r["mean_diff"] - 1.96 * r["se_diff"])
        wy1 = ypix(r["mean_diff"] + 1.96 * r["se_diff"])
        parts.append(
            f'<line x1="{_fmt(xc)}" y1="{_fmt(wy0)}" x2="{_fmt(xc)}" y2="{_fmt(wy1)}" '
            f'stroke="#222222" stroke-width="1.5"/>'
        )
        parts.append(_text(xc, HEIGHT - MARGIN / 3, str(i + 1), size=10))
    parts.append("</svg>")
    _write(path, parts)


def path_plot(times, values, running_max, path: str, title: str = "sample path") -> None:
    """Step plot of X with the running maximum overlaid."""
    lo = min(min(values), 0.0)
    hi = max(max(running_max), 1e-9)
    span = (hi - lo) or 1.0
    tmax = times[-1] or 1.0

    def xy(t, v):
        x = MARGIN + t / tmax * (WIDTH - 2 * MARGIN)
        y = HEIGHT - MARGIN - (v - lo) / span * (HEIGHT - 2 * MARGIN)
        return f"{_fmt(x)},{_fmt(y)}"

    parts = _header()
    parts.append(_text(WIDTH / 2, MARGIN / 2, title, size=14))
    for series, color in ((values, "#1f77b4"), (running_max, "#d62728")):
        pts = " ".join(xy(t, v) for t, v in zip(times, series))
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.2"/>'
        )
    parts.append(_text(WIDTH / 2, HEIGHT - MARGIN / 4, "t"))
    parts.append("</svg>")
    _write(path, parts)


def _write(path: str, parts: list[str]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")
