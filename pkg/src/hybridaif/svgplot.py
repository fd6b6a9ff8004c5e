"""Tiny SVG writers for scene frames and result charts.

Plots are a reporting convenience, not a rendering engine: everything is
built by string concatenation so the package needs no plotting dependency.
Charts handle NaN gaps (series break there) and optional symmetric
confidence bands.
"""

from __future__ import annotations

import numpy as np

from .environment import WorldState, arm_poses, tool_tip

_PALETTE = ("#1f6fb2", "#d1495b", "#3a9e5f", "#b07818", "#7d5ba6", "#4a4a4a")


def _fmt(x: float) -> str:
    return format(float(x), ".2f")


def _polyline(points, **attrs) -> str:
    joined = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
    extra = "".join(f' {k.replace("_", "-")}="{v}"' for k, v in attrs.items())
    return f'<polyline points="{joined}" fill="none"{extra}/>'


def _circle(x, y, r, **attrs) -> str:
    extra = "".join(f' {k.replace("_", "-")}="{v}"' for k, v in attrs.items())
    return f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r)}"{extra}/>'


def _text(x, y, s, size=13, anchor="start", color="#333") -> str:
    return (f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" '
            f'text-anchor="{anchor}" fill="{color}" '
            f'font-family="sans-serif">{s}</text>')


def render_frame(world: WorldState, hierarchy=None,
                 position_scale: float = 1.0, label: str = "") -> str:
    """One scene snapshot as an SVG document string.

    If a belief hierarchy is passed, the believed tool pathway (dashed) and
    ball pathway (dotted) are overlaid, converted back to pixels with
    position_scale.
    """
    size = world.config.arena_size
    flip = lambda p: (p[0], size - p[1])  # world y up, SVG y down

    base = np.array(world.config.base_xy)
    joints = arm_poses(world)[:, :2]
    arm_pts = [flip(base)] + [flip(p) for p in joints]
    tip = tool_tip(world)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {size:g} '
        f'{size:g}" width="520" height="520">',
        f'<rect width="{size:g}" height="{size:g}" fill="#fbfbf8" '
        f'stroke="#888" stroke-width="4"/>',
    ]

    if hierarchy is not None:
        for entity, dash, color in ((1, "14 10", "#1f6fb2"),
                                    (2, "4 8", "#3a9e5f")):
            pts = [flip(base)]
            for lvl in range(hierarchy.n_levels):
                if not hierarchy.entity_mask[lvl, entity]:
                    continue
                pts.append(flip(hierarchy.mu_e[lvl, entity, :2]
                                * position_scale))
            parts.append(_polyline(pts, stroke=color, stroke_width=5,
                                   stroke_dasharray=dash, opacity="0.7"))

    parts.append(_polyline(arm_pts, stroke="#333", stroke_width=8,
                           stroke_linecap="round"))
    for p in arm_pts:
        parts.append(_circle(p[0], p[1], 7, fill="#333"))
    parts.append(_polyline([flip(world.tool_origin), flip(tip)],
                           stroke="#d17818", stroke_width=8,
                           stroke_linecap="round"))
    parts.append(_circle(*flip(world.tool_origin), 10,
                         fill="#fff" if not world.grasped else "#d17818",
                         stroke="#d17818", stroke_width=4))
    parts.append(_circle(*flip(world.ball_pos), 12, fill="#d1495b"))
    if label:
        parts.append(_text(20, 40, label, size=36))
    parts.append("</svg>")
    return "\n".join(parts)


def _finite_runs(xs, ys):
    """Split a series into maximal runs of finite points."""
    run = []
    for x, y in zip(xs, ys):
        if np.isfinite(x) and np.isfinite(y):
            run.append((x, y))
        elif run:
            yield run
            run = []
    if run:
        yield run


def line_chart(x, series, *, title="", xlabel="", ylabel="",
               width=640, height=420, y_min=None, y_max=None) -> str:
    """A line chart as an SVG document string.

    series maps label -> (y, ci) where ci is an optional symmetric 95%
    half-width drawn as a translucent band (None or NaN entries skipped).
    """
    x = np.asarray(x, dtype=float)
    left, right, top, bottom = 64, 16, 34, 46
    pw, ph = width - left - right, height - top - bottom

    lo, hi = np.inf, -np.inf
    for y, ci in series.values():
        y = np.asarray(y, dtype=float)
        half = np.zeros_like(y) if ci is None else np.nan_to_num(
            np.asarray(ci, dtype=float))
        finite = np.isfinite(y)
        if finite.any():
            lo = min(lo, np.min((y - half)[finite]))
            hi = max(hi, np.max((y + half)[finite]))
    if not np.isfinite(lo):
        lo, hi = 0.0, 1.0
    if y_min is not None:
        lo = y_min
    if y_max is not None:
        hi = y_max
    if hi <= lo:
        hi = lo + 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    x0, x1 = float(np.min(x)), float(np.max(x))
    if x1 <= x0:
        x1 = x0 + 1.0

    sx = lambda v: left + (v - x0) / (x1 - x0) * pw
    sy = lambda v: top + (hi - v) / (hi - lo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} '
        f'{height}" width="{width}" height="{height}" '
        f'style="background:#fff">',
        _text(width / 2, 20, title, size=15, anchor="middle"),
    ]
    for i in range(5):
        yv = lo + pad + (hi - lo - 2 * pad) * i / 4
        parts.append(_polyline([(left, sy(yv)), (left + pw, sy(yv))],
                               stroke="#ddd", stroke_width=1))
        parts.append(_text(left - 6, sy(yv) + 4, format(yv, ".3g"),
                           size=11, anchor="end"))
        xv = x0 + (x1 - x0) * i / 4
        parts.append(_text(sx(xv), height - bottom + 16, format(xv, ".3g"),
                           size=11, anchor="middle"))
    parts.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" '
                 f'fill="none" stroke="#666"/>')
    parts.append(_text(left + pw / 2, height - 8, xlabel, anchor="middle"))
    parts.append(f'<g transform="rotate(-90 14 {top + ph / 2})">'
                 + _text(14, top + ph / 2, ylabel, anchor="middle") + "</g>")

    for idx, (label, (y, ci)) in enumerate(series.items()):
        color = _PALETTE[idx % len(_PALETTE)]
        y = np.asarray(y, dtype=float)
        if ci is not None:
            ci = np.asarray(ci, dtype=float)
            ok = np.isfinite(y) & np.isfinite(ci)
            xs, ys, cs = x[ok], y[ok], ci[ok]
            if xs.size:
                band = ([(sx(a), sy(b + c)) for a, b, c in zip(xs, ys, cs)]
                        + [(sx(a), sy(b - c))
                           for a, b, c in zip(xs[::-1], ys[::-1], cs[::-1])])
                pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in band)
                parts.append(f'<polygon points="{pts}" fill="{color}" '
                             f'opacity="0.15"/>')
        for run in _finite_runs(x, y):
            parts.append(_polyline([(sx(a), sy(b)) for a, b in run],
                                   stroke=color, stroke_width=2))
        lx, ly = left + pw - 130, top + 16 + 16 * idx
        parts.append(_polyline([(lx, ly - 4), (lx + 22, ly - 4)],
                               stroke=color, stroke_width=2))
        parts.append(_text(lx + 28, ly, label, size=12))

    parts.append("</svg>")
    return "\n".join(parts)
