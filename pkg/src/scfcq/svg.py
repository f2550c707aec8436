"""Static SVG line charts of coefficient paths."""

from __future__ import annotations

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
W, H = 640, 400
ML, MR, MT, MB = 60, 130, 30, 45


def _f(v):
    return f"{v:.2f}"


def line_chart(path, x, series, bands=None, title="", xlabel="tau", ylabel="coefficient"):
    """Write one polyline per entry of ``series`` (name -> y values).

    ``bands`` maps a series name to ``(lower, upper)`` arrays drawn as a
    shaded polygon behind the line.
    """
    x = np.asarray(x, dtype=float)
    bands = bands or {}
    ys = [np.asarray(v, dtype=float) for v in series.values()]
    ys += [np.asarray(b, dtype=float) for pair in bands.values() for b in pair]
    finite = np.concatenate([y[np.isfinite(y)] for y in ys]) if ys else np.zeros(1)
    ylo, yhi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if yhi - ylo < 1e-12:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad
    xlo, xhi = float(x.min()), float(x.max())
    if xhi - xlo < 1e-12:
        xlo, xhi = xlo - 0.5, xhi + 0.5

    def px(v):
        return ML + (v - xlo) / (xhi - xlo) * (W - ML - MR)

    def py(v):
        return H - MB - (v - ylo) / (yhi - ylo) * (H - MT - MB)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{ML}" y1="{H - MB}" x2="{W - MR}" y2="{H - MB}" stroke="black"/>',
        f'<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{H - MB}" stroke="black"/>',
    ]
    for t in np.linspace(xlo, xhi, 5):
        out.append(f'<text x="{_f(px(t))}" y="{H - MB + 16}" text-anchor="middle" font-size="11">{t:.2f}</text>')
    for t in np.linspace(ylo, yhi, 5):
        out.append(f'<text x="{ML - 6}" y="{_f(py(t) + 4)}" text-anchor="end" font-size="11">{t:.3g}</text>')
    out.append(f'<text x="{(ML + W - MR) / 2}" y="{H - 8}" text-anchor="middle" font-size="12">{xlabel}</text>')
    out.append(
        f'<text x="14" y="{(MT + H - MB) / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {(MT + H - MB) / 2})">{ylabel}</text>'
    )
    for i, (name, y) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        if name in bands:
            lo, hi = (np.asarray(b, dtype=float) for b in bands[name])
            ok = np.isfinite(lo) & np.isfinite(hi)
            pts = [f"{_f(px(a))},{_f(py(b))}" for a, b in zip(x[ok], hi[ok])]
            pts += [f"{_f(px(a))},{_f(py(b))}" for a, b in zip(x[ok][::-1], lo[ok][::-1])]
            out.append(f'<polygon points="{" ".join(pts)}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(y)
        pts = " ".join(f"{_f(px(a))},{_f(py(b))}" for a, b in zip(x[ok], y[ok]))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = MT + 16 * i + 10
        out.append(f'<line x1="{W - MR + 10}" y1="{ly}" x2="{W - MR + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - MR + 35}" y="{ly + 4}" font-size="11">{name}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
