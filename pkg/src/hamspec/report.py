"""Tables and plots written by the command line front end.

All output is deterministic for a given input: floats are written with
``repr`` and JSON keys are sorted.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .classify import CaseKind
from .spectral import ApproximationReport, EigenList


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (complex, np.complexfloating)):
        return f"{float(x.real)!r}{float(x.imag):+.17g}j"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path | None, header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, CaseKind):
        return obj.value
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def eigen_rows(eigs: EigenList, shift: float, oracle: list | None):
    """One row per eigenvalue: signed index, value, multiplicity, nearest oracle root."""
    rows = []
    vals = eigs.values
    mult = np.repeat(eigs.multiplicities, eigs.multiplicities) if len(vals) else []
    neg = int(np.count_nonzero(vals < 0))
    for i, v in enumerate(vals):
        k = i - neg if i < neg else i - neg + 1
        o = None
        if oracle:
            o = min(oracle, key=lambda r: abs(r - (v + shift)))
        rows.append([k, v + shift, int(mult[i]), o])
    return rows


def trajectory_table(rep: ApproximationReport):
    return [[row.r, row.b, row.k, row.lam, row.e_r, row.bound_a, row.bound_b, row.verdict]
            for row in rep.rows]


def defect_table(rep: ApproximationReport):
    rows = []
    for i, run in enumerate(rep.runs):
        for j, d in enumerate(run.defects):
            rows.append([i, run.b, j, d.delta, d.delta1, d.delta2, d.g_norm2])
    return rows


# --- SVG -------------------------------------------------------------------------

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
            "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"]


def convergence_svg(rep: ApproximationReport, width: int = 720, height: int = 480) -> str:
    """Eigenvalue trajectories against ``b`` (log axis), one polyline per index.

    Bound envelopes are drawn only in the limit circle case; otherwise the
    plot carries an ``inclusion-only`` banner.
    """
    ml, mr, mt, mb = 70, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb
    bs = [r.b for r in rep.runs]
    series = {}
    for row in rep.rows:
        if row.lam is not None:
            series.setdefault(row.k, []).append((row.b, row.lam, row.bound_a))
    ys = [p[1] for pts in series.values() for p in pts]
    if not bs or not ys:
        lo_y, hi_y = -1.0, 1.0
    else:
        lo_y, hi_y = min(ys), max(ys)
    if hi_y - lo_y <= 0:
        lo_y, hi_y = lo_y - 1.0, hi_y + 1.0
    pad = 0.05 * (hi_y - lo_y)
    lo_y, hi_y = lo_y - pad, hi_y + pad
    lx = [math.log10(b) for b in bs] or [0.0, 1.0]
    lo_x, hi_x = min(lx), max(lx)
    if hi_x - lo_x <= 0:
        lo_x, hi_x = lo_x - 0.5, hi_x + 0.5

    def px(b):
        return ml + pw * (math.log10(b) - lo_x) / (hi_x - lo_x)

    def py(y):
        y = min(max(y, lo_y), hi_y)
        return mt + ph * (1 - (y - lo_y) / (hi_y - lo_y))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for b in bs:
        x = px(b)
        out.append(f'<line x1="{x:.2f}" y1="{mt + ph}" x2="{x:.2f}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{mt + ph + 18}" text-anchor="middle">{b}</text>')
    for i in range(5):
        y = lo_y + (hi_y - lo_y) * i / 4
        out.append(f'<text x="{ml - 6}" y="{py(y) + 4:.2f}" text-anchor="end">{y:.3g}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 10}" text-anchor="middle">b (log scale)</text>')
    out.append(f'<text x="16" y="{mt + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + ph / 2})">eigenvalue</text>')
    lcc = rep.case is CaseKind.LIMIT_CIRCLE
    for i, k in enumerate(sorted(series)):
        color = _PALETTE[i % len(_PALETTE)]
        pts = series[k]
        poly = " ".join(f"{px(b):.2f},{py(y):.2f}" for b, y, _ in pts)
        out.append(f'<polyline class="trajectory" data-k="{k}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5" points="{poly}"/>')
        if lcc:
            for sign in (1, -1):
                env = [(b, y + sign * e) for b, y, e in pts if e is not None and math.isfinite(e)]
                if len(env) >= 1:
                    poly = " ".join(f"{px(b):.2f},{py(y):.2f}" for b, y in env)
                    out.append(f'<polyline class="envelope" data-k="{k}" fill="none" stroke="{color}" '
                               f'stroke-dasharray="4 3" stroke-width="0.8" points="{poly}"/>')
        b_last, y_last, _ = pts[-1]
        out.append(f'<text x="{px(b_last) - 4:.2f}" y="{py(y_last) - 4:.2f}" text-anchor="end" '
                   f'fill="{color}">k={k}</text>')
    if not lcc:
        out.append(f'<text class="banner" x="{ml + pw / 2}" y="{mt - 14}" text-anchor="middle" '
                   f'font-weight="bold">inclusion-only: no convergence or bounds claimed</text>')
    else:
        out.append(f'<text x="{ml + pw / 2}" y="{mt - 14}" text-anchor="middle">'
                   f'trajectories with error-bound envelopes (dashed)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
