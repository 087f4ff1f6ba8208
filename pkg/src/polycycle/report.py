"""Deterministic JSON/CSV writers and standalone SVG figures for command reports."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = ["to_jsonable", "write_json", "write_csv", "svg_curves", "write_svg", "domain_svg"]


def to_jsonable(obj):
    """Plain Python structure with complex numbers as [re, im] and numpy values unwrapped."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(float(np.real(obj))), to_jsonable(float(np.imag(obj)))]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if not np.isfinite(v):
            return None if np.isnan(v) else ("inf" if v > 0 else "-inf")
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if obj is None or isinstance(obj, (str, int, bool)):
        return obj
    return str(obj)


def write_json(path, payload: dict) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(to_jsonable(payload), sort_keys=True, indent=2) + "\n")
    return p


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.16e}" if isinstance(v, (float, np.floating)) else v for v in r])
    return p


_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def svg_curves(curves: Sequence[tuple[str, np.ndarray]], points: Sequence[tuple[str, complex]] = (),
               *, title: str = "", size: int = 480, closed: Sequence[bool] | None = None) -> str:
    """Polylines (label, complex array) and marked points drawn in a square frame."""
    allz = [np.asarray(c, dtype=complex) for _, c in curves] + [np.array([p]) for _, p in points]
    z = np.concatenate(allz) if allz else np.zeros(1, complex)
    z = z[np.isfinite(z)]
    lo = complex(z.real.min(), z.imag.min())
    hi = complex(z.real.max(), z.imag.max())
    span = max(hi.real - lo.real, hi.imag - lo.imag) or 1.0
    pad = 0.05 * span
    scale = (size - 40) / (span + 2 * pad)

    def xy(w):
        return 20 + (w.real - lo.real + pad) * scale, size - 20 - (w.imag - lo.imag + pad) * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + 20}" '
           f'viewBox="0 0 {size} {size + 20}">',
           f'<rect width="{size}" height="{size + 20}" fill="white"/>']
    if title:
        out.append(f'<text x="10" y="{size + 14}" font-family="sans-serif" font-size="11">{title}</text>')
    for i, (label, c) in enumerate(curves):
        c = np.asarray(c, dtype=complex)
        c = c[np.isfinite(c)]
        if c.size < 2:
            continue
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in (xy(w) for w in c))
        tag = "polygon" if closed is not None and closed[i] else "polyline"
        out.append(f'<{tag} points="{pts}" fill="none" stroke="{_COLORS[i % len(_COLORS)]}" '
                   f'stroke-width="1.2"><title>{label}</title></{tag}>')
    for label, p in points:
        a, b = xy(complex(p))
        out.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="black"><title>{label}</title></circle>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, text: str) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)
    return p


def domain_svg(domain, title: str = "") -> str:
    """Counting-domain boundary (one curve per segment) with the punctures marked."""
    curves = [(f"{s.label or s.tag}", s.z(np.linspace(0, 1, 200))) for s in domain.segments]
    pts = [(f"s{i + 1}", complex(s)) for i, s in enumerate(domain.punctures)]
    return svg_curves(curves, pts, title=title)
