"""Minimal deterministic SVG line charts for sweep results."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

from .numerics import InvalidParameterError

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=150, top=50, bottom=60)


def nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0 if lo == 0 else lo + abs(lo)
    raw = (hi - lo) / max(target, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _num(v: float) -> str:
    return f"{v:.2f}"


def _label(v: float) -> str:
    return f"{v:.4g}"


def emit_svg_lineplot(series: dict, title: str, x_label: str = "b",
                      y_label: str = "mean leakage (nats)", log_x: bool = False) -> str:
    """Render ``{name: [(x, mean, lo, hi), ...]}`` as a standalone SVG document.

    Each series becomes one polyline through its means plus a translucent
    polygon spanning its min/max band.
    """
    series = {name: sorted(pts) for name, pts in series.items() if pts}
    if not series:
        raise InvalidParameterError("nothing to plot")
    tx = (lambda x: math.log10(x)) if log_x else (lambda x: x)
    if log_x and any(x <= 0 for pts in series.values() for x, *_ in pts):
        raise InvalidParameterError("log-scaled x axis needs positive values")

    xs = [tx(x) for pts in series.values() for x, *_ in pts]
    ys = [v for pts in series.values() for _, m, lo, hi in pts for v in (m, lo, hi)]
    x0, x1 = min(xs), max(xs)
    if x0 == x1:
        x0, x1 = x0 - 1, x1 + 1
    yticks = nice_ticks(min(ys), max(ys))
    y0, y1 = min(yticks[0], min(ys)), max(yticks[-1], max(ys))
    if y0 == y1:
        y0, y1 = y0 - 1, y1 + 1

    left, top = MARGIN["left"], MARGIN["top"]
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return left + (tx(x) - x0) / (x1 - x0) * pw

    def py(y):
        return top + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="25" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<g class="axes" stroke="black" stroke-width="1">'
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}"/>'
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}"/></g>',
    ]

    if log_x:
        xticks = [10.0 ** e for e in range(math.floor(x0), math.ceil(x1) + 1)
                  if x0 - 1e-9 <= e <= x1 + 1e-9]
        xticks = xticks or sorted({x for pts in series.values() for x, *_ in pts})
    else:
        xticks = [t for t in nice_ticks(x0, x1) if x0 - 1e-9 <= t <= x1 + 1e-9]
    out.append('<g class="xticks">')
    for t in xticks:
        x = px(t)
        out.append(f'<line x1="{_num(x)}" y1="{top + ph}" x2="{_num(x)}" y2="{top + ph + 5}" stroke="black"/>'
                   f'<text x="{_num(x)}" y="{top + ph + 18}" text-anchor="middle">{_label(t)}</text>')
    out.append('</g><g class="yticks">')
    for t in yticks:
        if not y0 - 1e-12 <= t <= y1 + 1e-12:
            continue
        y = py(t)
        out.append(f'<line x1="{left - 5}" y1="{_num(y)}" x2="{left}" y2="{_num(y)}" stroke="black"/>'
                   f'<text x="{left - 8}" y="{_num(y + 4)}" text-anchor="end">{_label(t)}</text>')
    out.append('</g>')
    if y0 < 0 < y1:
        out.append(f'<line x1="{left}" y1="{_num(py(0))}" x2="{left + pw}" y2="{_num(py(0))}" '
                   'stroke="#999" stroke-dasharray="4 3"/>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">{escape(x_label)}</text>')
    out.append(f'<text transform="translate(18 {top + ph / 2:.1f}) rotate(-90)" '
               f'text-anchor="middle">{escape(y_label)}</text>')

    for i, (name, pts) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        upper = " ".join(f"{_num(px(x))},{_num(py(hi))}" for x, _, _, hi in pts)
        lower = " ".join(f"{_num(px(x))},{_num(py(lo))}" for x, _, lo, _ in reversed(pts))
        line = " ".join(f"{_num(px(x))},{_num(py(m))}" for x, m, _, _ in pts)
        out.append(f'<polygon class="band" points="{upper} {lower}" fill="{color}" '
                   'fill-opacity="0.15" stroke="none"/>')
        out.append(f'<polyline class="series" data-name="{escape(str(name))}" points="{line}" '
                   f'fill="none" stroke="{color}" stroke-width="2"/>')
        ly = top + 10 + 20 * i
        lx = left + pw + 15
        out.append(f'<g class="legend"><line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>'
                   f'<text x="{lx + 26}" y="{ly + 4}">{escape(str(name))}</text></g>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_results(rows: list[dict], out_dir) -> list[Path]:
    """Write one SVG per panel of a sweep or lambda-sweep results table."""
    from .experiments import mean_series

    if not rows:
        raise InvalidParameterError("results table is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if "lambda" in rows[0]:
        series = mean_series(rows, x_key="lambda", group_keys=("n", "d", "b", "classifier"),
                             series_key="k")
        for (n, d, b, clf), s in series.items():
            named = {f"k={int(k)}": pts for k, pts in sorted(s.items())}
            title = f"joint CBM, n={int(n)} d={int(d)} b={int(b)} ({clf})"
            path = out_dir / f"lambda_n{int(n)}_d{int(d)}_b{int(b)}_{clf}.svg"
            path.write_text(emit_svg_lineplot(named, title, x_label="lambda", log_x=True),
                            encoding="utf-8")
            written.append(path)
        return written
    series = mean_series(rows, x_key="b", group_keys=("n", "d", "k", "noise"),
                         series_key="classifier")
    for (n, d, k, noise), s in series.items():
        title = f"n={int(n)} d={int(d)} k={int(k)} noise={noise:g}"
        path = out_dir / f"leakage_n{int(n)}_d{int(d)}_k{int(k)}_noise{noise:g}.svg"
        path.write_text(emit_svg_lineplot(s, title), encoding="utf-8")
        written.append(path)
    return written
