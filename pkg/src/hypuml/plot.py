"""Poincare-disk scatter plots written directly as SVG text.

Only natively two-dimensional embeddings are plotted.  The disk of radius
``1/sqrt(c)`` is drawn as a unit circle of ``radius`` pixels; dashed rings
mark fixed hyperbolic distances from the origin so the centre (uncertain)
and boundary (confident) regions can be read off.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .embeddings import Embeddings
from .errors import DimensionNotPlottable, IoError

# Tableau-10; classes beyond ten cycle through it
PALETTE = (
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
)
RING_DISTANCES = (0.5, 1.0, 2.0, 4.0)


def ring_radius(distance: float, c: float) -> float:
    """Fraction of the disk radius at hyperbolic distance ``distance`` from the origin."""
    # invert D(x, 0) = (2 / sqrt(c)) artanh(sqrt(c) ||x||) and normalize by 1/sqrt(c)
    return float(np.tanh(np.sqrt(c) * distance / 2.0))


def render_svg(emb: Embeddings, radius: int = 300, point_size: float = 3.0,
               colors=PALETTE, title: str | None = None) -> str:
    if emb.coords.ndim != 2 or emb.dim != 2:
        raise DimensionNotPlottable(
            f"embeddings have dimension {emb.dim}; only 2-d embeddings can be plotted "
            "(retrain with --dim-out 2)"
        )
    if radius < 10:
        raise ValueError("radius must be at least 10 pixels")
    pad = 20
    legend_w = 150
    size = 2 * (radius + pad)
    cx = cy = radius + pad
    unit = radius * np.sqrt(emb.c)  # pixels per ball coordinate unit

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size + legend_w}" height="{size}" '
        f'viewBox="0 0 {size + legend_w} {size}">',
        f'<rect width="{size + legend_w}" height="{size}" fill="white"/>',
    ]
    if title:
        out.append(f'<title>{escape(title)}</title>')
    out.append(f'<circle class="boundary" cx="{cx}" cy="{cy}" r="{radius}" fill="none" stroke="black" stroke-width="1.5"/>')
    for d in RING_DISTANCES:
        r = ring_radius(d, emb.c) * radius
        out.append(
            f'<circle class="ring" cx="{cx}" cy="{cy}" r="{r:.3f}" fill="none" '
            f'stroke="#999999" stroke-width="0.7" stroke-dasharray="4 3"/>'
        )
        out.append(
            f'<text x="{cx + r + 2:.3f}" y="{cy - 2}" font-size="9" fill="#666666">d={d:g}</text>'
        )

    classes = np.unique(emb.labels)
    color_of = {int(k): colors[i % len(colors)] for i, k in enumerate(classes)}
    for (x, y), label in zip(emb.coords, emb.labels):
        px = cx + unit * x
        py = cy - unit * y
        out.append(
            f'<circle class="point" cx="{px:.3f}" cy="{py:.3f}" r="{point_size:g}" '
            f'fill="{color_of[int(label)]}" fill-opacity="0.8" data-label="{int(label)}"/>'
        )

    lx = size + 10
    out.append(f'<text x="{lx}" y="{pad + 4}" font-size="12" font-weight="bold">class</text>')
    for i, k in enumerate(classes):
        y = pad + 22 + 16 * i
        out.append(f'<circle cx="{lx + 5}" cy="{y - 4}" r="5" fill="{color_of[int(k)]}"/>')
        out.append(f'<text x="{lx + 16}" y="{y}" font-size="11">{int(k)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, emb: Embeddings, **kwargs) -> None:
    text = render_svg(emb, **kwargs)
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IoError(f"cannot write plot {path}: {exc}") from exc
