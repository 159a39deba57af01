"""Forest-plot data and a dependency-free SVG rendering."""

from __future__ import annotations

import math
from typing import Union
from xml.sax.saxutils import escape

from .bayes import PosteriorSummary
from .core import CpmSeries, MetaResult
from .intervals import pi_true_next, z_quantile


def forest_rows(series: CpmSeries, fit: Union[MetaResult, PosteriorSummary],
                level: float = 0.95, literal: bool = False) -> list[dict]:
    """Per-study CI rows, then a ``pooled`` diamond row and a ``prediction`` whisker row."""
    z = z_quantile(level)
    if isinstance(fit, PosteriorSummary):
        center, se = fit.auc_post, fit.sd_post
        wts = None
    else:
        center, se = fit.pooled, fit.pooled_se
        raw = [1.0 / (s.se**2 + fit.tau**2) for s in series.studies]
        wts = [w / sum(raw) for w in raw]
    rows = []
    for j, s in enumerate(series.studies):
        rows.append({"kind": "study", "label": s.study_label, "estimate": s.auc_hat, "se": s.se,
                     "lower": s.auc_hat - z * s.se, "upper": s.auc_hat + z * s.se,
                     "weight": None if wts is None else wts[j]})
    rows.append({"kind": "pooled", "label": "pooled", "estimate": center, "se": se,
                 "lower": center - z * se, "upper": center + z * se, "weight": None})
    pi = pi_true_next(fit, level, literal)
    rows.append({"kind": "prediction", "label": "prediction interval", "estimate": pi.center,
                 "se": None, "lower": pi.lower, "upper": pi.upper, "weight": None})
    return rows


def render_svg(rows: list[dict], title: str = "", width: int = 640) -> str:
    row_h, top, left, right = 22, 40, 180, 40
    height = top + row_h * (len(rows) + 1) + 30
    lo = min(r["lower"] for r in rows)
    hi = max(r["upper"] for r in rows)
    pad = 0.05 * (hi - lo or 1.0)
    lo, hi = lo - pad, hi + pad

    def x(v):
        return left + (v - lo) / (hi - lo) * (width - left - right)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle">{escape(title)}</text>']
    for i, r in enumerate(rows):
        yc = top + row_h * i + row_h / 2
        out.append(f'<text x="8" y="{yc + 4:.1f}">{escape(str(r["label"]))}</text>')
        if r["kind"] == "study":
            size = 4 + 8 * math.sqrt(r["weight"]) if r["weight"] is not None else 6
            out.append(f'<line x1="{x(r["lower"]):.2f}" y1="{yc:.1f}" x2="{x(r["upper"]):.2f}" '
                       f'y2="{yc:.1f}" stroke="black"/>')
            out.append(f'<rect x="{x(r["estimate"]) - size / 2:.2f}" y="{yc - size / 2:.2f}" '
                       f'width="{size:.2f}" height="{size:.2f}" fill="black"/>')
        elif r["kind"] == "pooled":
            pts = [(x(r["lower"]), yc), (x(r["estimate"]), yc - 7),
                   (x(r["upper"]), yc), (x(r["estimate"]), yc + 7)]
            out.append('<polygon points="' + " ".join(f"{a:.2f},{b:.1f}" for a, b in pts) + '" fill="black"/>')
        else:
            out.append(f'<line x1="{x(r["lower"]):.2f}" y1="{yc:.1f}" x2="{x(r["upper"]):.2f}" '
                       f'y2="{yc:.1f}" stroke="black" stroke-dasharray="3,3"/>')
    axis_y = top + row_h * len(rows) + 10
    out.append(f'<line x1="{left}" y1="{axis_y}" x2="{width - right}" y2="{axis_y}" stroke="black"/>')
    step = 0.05 if hi - lo < 0.6 else 0.1
    t = math.ceil(lo / step) * step
    while t <= hi + 1e-12:
        out.append(f'<line x1="{x(t):.2f}" y1="{axis_y}" x2="{x(t):.2f}" y2="{axis_y + 4}" stroke="black"/>')
        out.append(f'<text x="{x(t):.2f}" y="{axis_y + 16}" text-anchor="middle">{t:.2f}</text>')
        t += step
    out.append("</svg>")
    return "\n".join(out) + "\n"
