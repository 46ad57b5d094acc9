"""Self-contained SVG heatmaps with a diverging color scale over [-1, 1].

No graphics dependencies: cells are plain rects with value annotations,
so output is deterministic and diffable in golden-file tests.
"""
from __future__ import annotations

import numpy as np

# diverging blue-white-red anchors
_NEG = (33, 102, 172)
_MID = (247, 247, 247)
_POS = (178, 24, 43)


def _lerp(a, b, t):
    return tuple(round(x + (y - x) * t) for x, y in zip(a, b))


def _cell_color(v: float) -> tuple[int, int, int]:
    v = min(1.0, max(-1.0, v))
    if v < 0:
        return _lerp(_MID, _NEG, -v)
    return _lerp(_MID, _POS, v)


def _text_color(rgb) -> str:
    # relative luminance cutoff for readable annotations
    lum = 0.2126 * rgb[0] + 0.7152 * rgb[1] + 0.0722 * rgb[2]
    return "#000000" if lum > 140 else "#ffffff"


def render_heatmap(matrix: np.ndarray, labels, title: str = "",
                   cell: int = 44) -> str:
    """SVG text for a square matrix with row/column labels and a colorbar."""
    m = np.asarray(matrix, dtype=float)
    p = m.shape[0]
    labels = list(labels)
    margin_left = 14 + 7 * max((len(str(l)) for l in labels), default=0)
    margin_top = 40 if title else 16
    label_h = 14 + 7 * max((len(str(l)) for l in labels), default=0)
    bar_w = 46
    width = margin_left + cell * p + bar_w + 30
    height = margin_top + cell * p + label_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        '<style>text{font-family:monospace;}</style>',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    if title:
        out.append(f'<text x="{margin_left}" y="22" font-size="14">'
                   f'{title}</text>')
    for i in range(p):
        y = margin_top + i * cell
        out.append(f'<text x="{margin_left - 6}" y="{y + cell / 2 + 4:.0f}" '
                   f'font-size="11" text-anchor="end">{labels[i]}</text>')
        for j in range(p):
            x = margin_left + j * cell
            rgb = _cell_color(m[i, j])
            fill = f"rgb({rgb[0]},{rgb[1]},{rgb[2]})"
            out.append(f'<rect x="{x}" y="{y}" width="{cell}" '
                       f'height="{cell}" fill="{fill}" stroke="#dddddd"/>')
            out.append(f'<text x="{x + cell / 2}" y="{y + cell / 2 + 4:.0f}" '
                       f'font-size="10" text-anchor="middle" '
                       f'fill="{_text_color(rgb)}">{m[i, j]:+.2f}</text>')
    for j in range(p):
        x = margin_left + j * cell + cell / 2
        y = margin_top + p * cell + 10
        out.append(f'<text x="{x}" y="{y}" font-size="11" '
                   f'text-anchor="start" transform="rotate(90 {x} {y})">'
                   f'{labels[j]}</text>')
    # colorbar
    bx = margin_left + cell * p + 16
    bh = cell * p
    steps = 64
    for s in range(steps):
        v = 1.0 - 2.0 * s / (steps - 1)
        rgb = _cell_color(v)
        y = margin_top + bh * s / steps
        out.append(f'<rect x="{bx}" y="{y:.1f}" width="14" '
                   f'height="{bh / steps + 0.5:.1f}" '
                   f'fill="rgb({rgb[0]},{rgb[1]},{rgb[2]})"/>')
    for v, frac in ((1.0, 0.0), (0.0, 0.5), (-1.0, 1.0)):
        out.append(f'<text x="{bx + 18}" y="{margin_top + bh * frac + 4:.0f}" '
                   f'font-size="10">{v:+.0f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
