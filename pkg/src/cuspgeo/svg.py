"""Deterministic SVG phase portraits.

Output is a plain-text SVG document built with fixed formatting and ordering:
identical inputs produce byte-identical documents (no timestamps, no
randomness), so portraits can be diffed across runs.
"""

from __future__ import annotations

import numpy as np

from .dynamics import Trajectory

__all__ = ["render_svg_phase_portrait"]

_WIDTH, _HEIGHT = 800.0, 600.0
_MARGIN = 50.0
_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
            "#17becf", "#7f7f7f"]


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def render_svg_phase_portrait(
    trajectories: list[Trajectory],
    window,
    *,
    axes: str = "phi-theta",
    marks: list[tuple[float, float]] | None = None,
    title: str = "",
) -> str:
    """Render trajectories into an SVG document string.

    ``window = ((x_lo, x_hi), (y_lo, y_hi))`` in the chosen coordinates;
    ``axes`` is ``"phi-theta"`` (boundary portraits) or ``"phi-r"`` (geodesic
    fans); ``marks`` are points drawn as filled circles (critical points).
    """
    if not trajectories:
        raise ValueError("need at least one trajectory")
    if axes not in ("phi-theta", "phi-r"):
        raise ValueError(f"axes must be 'phi-theta' or 'phi-r', got {axes!r}")
    (x_lo, x_hi), (y_lo, y_hi) = window
    if not (x_hi > x_lo and y_hi > y_lo):
        raise ValueError("window must have positive extent")

    def to_px(x, y):
        px = _MARGIN + (x - x_lo) / (x_hi - x_lo) * (_WIDTH - 2 * _MARGIN)
        py = _HEIGHT - _MARGIN - (y - y_lo) / (y_hi - y_lo) * (_HEIGHT - 2 * _MARGIN)
        return px, py

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_fmt(_WIDTH)} {_fmt(_HEIGHT)}">',
        f'<rect x="0" y="0" width="{_fmt(_WIDTH)}" height="{_fmt(_HEIGHT)}" fill="white"/>',
        f'<rect x="{_fmt(_MARGIN)}" y="{_fmt(_MARGIN)}" width="{_fmt(_WIDTH - 2 * _MARGIN)}"'
        f' height="{_fmt(_HEIGHT - 2 * _MARGIN)}" fill="none" stroke="black" stroke-width="1"/>',
    ]
    if title:
        lines.append(
            f'<text x="{_fmt(_WIDTH / 2)}" y="{_fmt(_MARGIN / 2)}" text-anchor="middle" '
            f'font-family="monospace" font-size="14">{title}</text>'
        )
    for idx, traj in enumerate(trajectories):
        xs = traj.phi
        ys = traj.theta if axes == "phi-theta" else traj.r
        pts = []
        for x, y in zip(xs, ys):
            if np.isfinite(x) and np.isfinite(y):
                px, py = to_px(float(x), float(y))
                pts.append(f"{_fmt(px)},{_fmt(py)}")
        if len(pts) < 2:
            continue
        color = _PALETTE[idx % len(_PALETTE)]
        lines.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1" '
            f'points="{" ".join(pts)}"/>'
        )
    for x, y in marks or []:
        px, py = to_px(float(x), float(y))
        lines.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="4" fill="black"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
