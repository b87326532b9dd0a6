"""Reference boundary geometries used throughout the tests and the CLI.

All three classic surfaces are cylinders over plane curves: a circle centered
at the cusp axis (constant S), a centered ellipse (four critical points), and
a unit circle offset by c > 1 (two critical points; the parameter c sweeps the
eigenvalue regime at the minimum).
"""

from __future__ import annotations

import numpy as np

from .fourier import BoundaryFunction
from .metric import CuspMetric, EmbeddedBoundaryCurve, make_model_metric

__all__ = ["circle", "ellipse", "offset_circle", "cosine_profile", "by_name",
           "curve_circle", "curve_ellipse", "curve_offset_circle"]

_TWO_PI = 2.0 * np.pi


def circle(radius: float = 1.0, k: int = 2) -> CuspMetric:
    """Boundary circle of given radius centered at the origin: S = radius^2."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    length = _TWO_PI * radius
    return make_model_metric(
        k,
        BoundaryFunction.constant(radius * radius, length),
        BoundaryFunction.constant(1.0, length),
    )


def offset_circle(c: float = 2.0, k: int = 2) -> CuspMetric:
    """Unit circle centered at (c, 0), c > 1 keeps the origin outside.

    In arc length, S(phi) = c^2 + 1 + 2 c cos(phi), so the boundary data is
    exact: maximum at phi = 0 with S'' = -2c, minimum at phi = pi with
    S'' = 2c.
    """
    if c <= 1.0:
        raise ValueError("offset c must exceed 1 (origin outside the disk)")
    s = BoundaryFunction.from_coefficients([c * c + 1.0, 2.0 * c], [0.0], _TWO_PI)
    return make_model_metric(k, s, BoundaryFunction.constant(1.0, _TWO_PI))


def ellipse(c: float = 2.0, b: float = 1.0, k: int = 2) -> CuspMetric:
    """Centered ellipse v^2/c^2 + w^2/b^2 = 1 with c > b > 0.

    Built through the generic curve pipeline (arc-length reparametrization and
    Fourier fit of |u|^2); there is no elementary closed form for S here.
    """
    from .metric import metric_from_boundary_curve

    if not c > b > 0:
        raise ValueError("need c > b > 0")
    return metric_from_boundary_curve(curve_ellipse(c, b), k)


def cosine_profile(mean: float = 2.0, amplitude: float = 1.0, k: int = 2) -> CuspMetric:
    """One-harmonic profile S = mean + amplitude cos(phi) on a length-2pi circle.

    The minimum sits at phi = pi with S'' = amplitude, so sweeping the
    amplitude moves the Hessian value a at the minimum through any threshold.
    """
    s = BoundaryFunction.from_coefficients([mean, amplitude], [0.0], _TWO_PI)
    return make_model_metric(k, s, BoundaryFunction.constant(1.0, _TWO_PI))


# -- raw curves, for exercising the embedded-curve pipeline -----------------


def curve_circle(radius: float = 1.0, center=(0.0, 0.0)) -> EmbeddedBoundaryCurve:
    cx, cy = center

    def fn(t):
        t = np.asarray(t, dtype=float)
        return np.stack([cx + radius * np.cos(t), cy + radius * np.sin(t)], axis=-1)

    return EmbeddedBoundaryCurve.from_function(fn)


def curve_offset_circle(c: float = 2.0) -> EmbeddedBoundaryCurve:
    return curve_circle(1.0, center=(c, 0.0))


def curve_ellipse(c: float = 2.0, b: float = 1.0) -> EmbeddedBoundaryCurve:
    def fn(t):
        t = np.asarray(t, dtype=float)
        return np.stack([c * np.cos(t), b * np.sin(t)], axis=-1)

    return EmbeddedBoundaryCurve.from_function(fn)


_PRESETS = {
    "circle": (circle, ("radius",)),
    "offset_circle": (offset_circle, ("c",)),
    "ellipse": (ellipse, ("c", "b")),
    "cosine": (cosine_profile, ("mean", "amplitude")),
}


def by_name(name: str, k: int = 2, **params) -> CuspMetric:
    """Look up a preset by name; unknown parameter names are rejected."""
    if name not in _PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(_PRESETS)}")
    fn, allowed = _PRESETS[name]
    bad = set(params) - set(allowed)
    if bad:
        raise ValueError(f"preset {name!r} does not accept parameters {sorted(bad)}")
    return fn(k=k, **params)
