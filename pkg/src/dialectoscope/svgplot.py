"""Hand-rolled SVG scatter for dialectograms.

Plotting libraries embed timestamps, version strings, and float noise in
their SVG output; this writer produces the same bytes for the same
dialectogram every time, which keeps exports diffable and testable.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

from .dialectogram import Dialectogram

WIDTH, HEIGHT = 1600, 1200
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 120, 60, 60, 100
PLOT_W = WIDTH - MARGIN_L - MARGIN_R
PLOT_H = HEIGHT - MARGIN_T - MARGIN_B

STYLE = """\
 text { font-family: sans-serif; fill: #202124; }
 .frame { stroke: #202124; stroke-width: 1.5; fill: none; }
 .tick { stroke: #202124; stroke-width: 1.5; }
 .grid { stroke: #e8eaed; stroke-width: 1; }
 .diag { stroke: #5f6368; stroke-width: 1.5; stroke-dasharray: 6 4; }
 .pt { fill-opacity: 0.75; }
 .pt-both { fill: #7b3294; }
 .pt-only1 { fill: #c0392b; }
 .pt-only2 { fill: #1f6fb2; }
 .pt-neither { fill: #8d9399; }
 .lbl { font-size: 13px; }
 .ticklabel { font-size: 14px; }
 .axislabel { font-size: 19px; }
"""

CLASS_ORDER = ("both", "only1", "only2", "neither")


def _fmt(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def _radius(freq1: int, freq2: int) -> float:
    # marker area tracks sqrt(mean frequency), so radius is its 4th root
    r = 2.2 * ((freq1 + freq2) / 2.0) ** 0.25
    return min(max(r, 2.0), 16.0)


def _limits(d: Dialectogram) -> tuple[float, float]:
    values = [r.alpha1 for r in d.records] + [r.alpha2 for r in d.records]
    if not values:
        return -1.0, 1.0
    lo, hi = min(values + [-0.05]), max(values + [0.05])
    pad = 0.06 * (hi - lo)
    return lo - pad, hi + pad


def dialectogram_svg(d: Dialectogram, label_top: int = 80) -> str:
    lo, hi = _limits(d)
    span = hi - lo

    def px(x: float) -> float:
        return MARGIN_L + (x - lo) / span * PLOT_W

    def py(y: float) -> float:
        return MARGIN_T + (hi - y) / span * PLOT_H

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<style>\n{STYLE}</style>",
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{PLOT_W}" height="{PLOT_H}" '
        f'fill="#ffffff" class="frame"/>',
    ]

    ticks = [lo + span * k / 5 for k in range(6)]
    for t in ticks:
        x, y = _fmt(px(t)), _fmt(py(t))
        bottom = MARGIN_T + PLOT_H
        out.append(f'<line class="grid" x1="{x}" y1="{MARGIN_T}" x2="{x}" y2="{bottom}"/>')
        out.append(f'<line class="grid" x1="{MARGIN_L}" y1="{y}" x2="{MARGIN_L + PLOT_W}" y2="{y}"/>')
        out.append(f'<line class="tick" x1="{x}" y1="{bottom}" x2="{x}" y2="{bottom + 7}"/>')
        out.append(
            f'<text class="ticklabel" x="{x}" y="{bottom + 24}" text-anchor="middle">{_fmt(t)}</text>'
        )
        out.append(f'<line class="tick" x1="{MARGIN_L - 7}" y1="{y}" x2="{MARGIN_L}" y2="{y}"/>')
        out.append(
            f'<text class="ticklabel" x="{MARGIN_L - 12}" y="{y}" '
            f'text-anchor="end" dominant-baseline="middle">{_fmt(t)}</text>'
        )

    out.append(
        f'<line class="diag" x1="{_fmt(px(lo))}" y1="{_fmt(py(lo))}" '
        f'x2="{_fmt(px(hi))}" y2="{_fmt(py(hi))}"/>'
    )

    xlabel = f"projection in corpus 1 ({d.focal} -> {d.translation_1to2})"
    ylabel = f"projection in corpus 2 ({d.focal} -> {d.translation_2to1})"
    cx = MARGIN_L + PLOT_W / 2
    cy = MARGIN_T + PLOT_H / 2
    out.append(
        f'<text class="axislabel" x="{_fmt(cx)}" y="{HEIGHT - 34}" '
        f'text-anchor="middle">{escape(xlabel)}</text>'
    )
    out.append(
        f'<text class="axislabel" x="40" y="{_fmt(cy)}" text-anchor="middle" '
        f'transform="rotate(-90 40 {_fmt(cy)})">{escape(ylabel)}</text>'
    )

    lx = MARGIN_L + PLOT_W - 150
    for k, cls in enumerate(CLASS_ORDER):
        ly = MARGIN_T + 18 + 22 * k
        out.append(f'<circle class="pt pt-{cls}" cx="{lx}" cy="{ly}" r="6"/>')
        out.append(
            f'<text class="lbl" x="{lx + 12}" y="{ly + 4}">co-occurs: {cls}</text>'
        )

    for r in d.records:
        out.append(
            f'<circle class="pt pt-{r.ec_class}" cx="{_fmt(px(r.alpha1))}" '
            f'cy="{_fmt(py(r.alpha2))}" r="{_fmt(_radius(r.freq1, r.freq2))}"/>'
        )

    # greedy label declutter: biggest combined projection first, a label is
    # dropped rather than moved onto one already placed
    candidates = sorted(
        d.records, key=lambda r: (-(abs(r.alpha1) + abs(r.alpha2)), r.token)
    )[:label_top]
    placed: list[tuple[float, float, float, float]] = []
    for r in candidates:
        w = 7.5 * len(r.token) + 4
        rad = _radius(r.freq1, r.freq2)
        x0 = px(r.alpha1) + rad + 3
        y0 = py(r.alpha2) - rad - 3
        if x0 + w > MARGIN_L + PLOT_W:
            x0 = px(r.alpha1) - rad - 3 - w
        box = (x0, y0 - 13, x0 + w, y0 + 3)
        if x0 < MARGIN_L or box[1] < MARGIN_T:
            continue
        if any(b[0] < box[2] and box[0] < b[2] and b[1] < box[3] and box[1] < b[3] for b in placed):
            continue
        placed.append(box)
        out.append(
            f'<text class="lbl" x="{_fmt(x0)}" y="{_fmt(y0)}">{escape(r.token)}</text>'
        )

    out.append("</svg>")
    return "\n".join(out) + "\n"
