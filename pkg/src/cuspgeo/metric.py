"""Model cusp metrics of order k, built from boundary data or embedded curves.

The interior model is exact:

    g = (1 - k(k-1) r^(2k-2) S(phi)) dr^2 + r^(2k) C(phi) dphi^2

with S, C finite Fourier series on the boundary circle.  All mixed terms and
higher remainder corrections are identically zero, so every downstream
quantity (dual metric, energy, vector field) has a closed form.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .fourier import BoundaryFunction

__all__ = [
    "CuspMetric",
    "EmbeddedBoundaryCurve",
    "make_model_metric",
    "metric_from_boundary_curve",
    "eval_s",
    "metric_tensor",
]

_TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# embedded boundary curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmbeddedBoundaryCurve:
    """A closed curve in R^d (d >= 2), from samples or a periodic callable.

    ``parametrization`` maps parameter values in [0, 2 pi) to points (shape
    ``(..., d)``).  Sampled curves are interpolated trigonometrically, which
    is spectrally accurate for smooth underlying curves; for rough polyline
    data the interpolation residual is reported by the arc-length fit.
    """

    samples: np.ndarray | None = None
    parametrization: Callable | None = None
    dim: int = 2

    def __post_init__(self) -> None:
        if (self.samples is None) == (self.parametrization is None):
            raise ValueError("provide exactly one of samples / parametrization")
        if self.samples is not None:
            pts = np.asarray(self.samples, dtype=float)
            if pts.ndim != 2 or pts.shape[1] < 2:
                raise ValueError("samples must have shape (n, d) with d >= 2")
            scale = float(np.max(np.abs(pts))) + 1.0
            if np.linalg.norm(pts[0] - pts[-1]) < 1e-9 * scale:
                pts = pts[:-1]  # drop duplicated closing point
            elif np.linalg.norm(pts[0] - pts[-1]) > 1e-3 * scale:
                raise ValueError("open curve: first and last samples differ")
            if pts.shape[0] < 3:
                raise ValueError("need at least 3 distinct samples")
            object.__setattr__(self, "samples", pts)
            object.__setattr__(self, "dim", pts.shape[1])

    @classmethod
    def from_samples(cls, samples) -> "EmbeddedBoundaryCurve":
        return cls(samples=np.asarray(samples, dtype=float))

    @classmethod
    def from_function(cls, fn: Callable, dim: int = 2) -> "EmbeddedBoundaryCurve":
        return cls(parametrization=fn, dim=dim)

    @classmethod
    def from_csv(cls, path) -> "EmbeddedBoundaryCurve":
        """Load samples from CSV: one header row, one coordinate per column."""
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 2:
            raise ValueError(f"{path}: no data rows")
        data = np.array([[float(v) for v in row] for row in rows[1:]])
        return cls.from_samples(data)

    @cached_property
    def component_series(self) -> list[BoundaryFunction]:
        """Trigonometric interpolants of the coordinates in the raw parameter."""
        if self.samples is not None:
            return [
                BoundaryFunction.from_samples(self.samples[:, j], _TWO_PI)
                for j in range(self.dim)
            ]
        probe = np.atleast_2d(np.asarray(self.parametrization(np.zeros(1)), float))
        d = probe.shape[-1]
        object.__setattr__(self, "dim", d)
        return [
            BoundaryFunction.from_callable(
                lambda t, j=j: np.atleast_2d(
                    np.asarray(self.parametrization(t), float)
                )[..., j].reshape(np.shape(t)),
                _TWO_PI,
            )
            for j in range(d)
        ]

    def point(self, t, deriv: int = 0) -> np.ndarray:
        """Point (or parameter derivative) on the interpolated curve."""
        cols = [series(t, deriv) for series in self.component_series]
        return np.stack([np.atleast_1d(c) for c in cols], axis=-1)

    def check_simple(self, n: int = 512, tol: float = 1e-9) -> None:
        """Reject self-intersecting resampled polylines."""
        t = np.arange(n) * (_TWO_PI / n)
        pts = self.point(t)
        scale = float(np.max(np.abs(pts))) + 1.0
        d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        idx = np.arange(n)
        sep = np.abs(idx[:, None] - idx[None, :])
        sep = np.minimum(sep, n - sep)
        near = (d2 < (tol * scale) ** 2) & (sep > n // 16)
        if np.any(near):
            i, j = np.argwhere(near)[0]
            raise ValueError(
                f"curve is not simple: samples {i} and {j} coincide within tolerance"
            )


# ---------------------------------------------------------------------------
# the metric
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CuspMetric:
    """Order-k model cusp metric determined by boundary data S, C."""

    k: int
    S: BoundaryFunction
    C: BoundaryFunction
    length: float
    curve: EmbeddedBoundaryCurve | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError(f"cusp order k must be >= 2, got {self.k}")
        if abs(self.S.period - self.length) > 1e-12 * self.length or abs(
            self.C.period - self.length
        ) > 1e-12 * self.length:
            raise ValueError("S and C must have period equal to the boundary length")
        c_min, _ = self.C.minmax()
        if c_min <= 0.0:
            raise ValueError(f"C must be positive everywhere; min sampled value {c_min}")

    # -- derived constants --------------------------------------------------

    @property
    def kappa(self) -> float:
        """k(k-1), the coefficient in front of r^(2k-2) S."""
        return float(self.k * (self.k - 1))

    @cached_property
    def sup_s(self) -> float:
        return self.S.minmax()[1]

    @cached_property
    def validity_radius(self) -> float:
        """Largest r with g_rr > 0 for all phi (inf when sup S <= 0)."""
        if self.sup_s <= 0.0:
            return np.inf
        return float((1.0 / (self.kappa * self.sup_s)) ** (1.0 / (2 * self.k - 2)))

    @cached_property
    def r_max(self) -> float:
        """Integration domain bound: keeps g_rr >= 1/2, well inside validity."""
        if self.sup_s <= 0.0:
            return np.inf
        return float((0.5 / (self.kappa * self.sup_s)) ** (1.0 / (2 * self.k - 2)))

    @cached_property
    def constant_s(self) -> bool:
        return self.S.is_constant()

    @cached_property
    def arc_length_parametrized(self) -> bool:
        lo, hi = self.C.minmax()
        return abs(lo - 1.0) < 1e-9 and abs(hi - 1.0) < 1e-9

    # -- pointwise evaluation -------------------------------------------------

    def s_bundle(self, phi) -> tuple:
        """(S, S_phi, S_phiphi) at ``phi``, exact on the Fourier data."""
        return self.S.bundle(phi)

    def tensor(self, r, phi) -> tuple:
        """Components (g_rr, g_rphi, g_phiphi); raises outside the validity radius."""
        r_arr = np.asarray(r, dtype=float)
        s_val = self.S(phi)
        g_rr = 1.0 - self.kappa * r_arr ** (2 * self.k - 2) * s_val
        if np.any(r_arr < 0) or np.any(g_rr <= 0.0):
            raise DomainError(
                f"r={r!r} outside the validity radius {self.validity_radius:.6g}"
            )
        g_pp = r_arr ** (2 * self.k) * self.C(phi)
        zero = np.zeros_like(g_rr)
        if np.ndim(r) == 0 and np.ndim(phi) == 0:
            return float(g_rr), 0.0, float(g_pp)
        return g_rr, zero, g_pp

    def wrap(self, phi):
        """Reduce ``phi`` modulo the boundary length."""
        return np.mod(phi, self.length)

    # -- packing for the compiled/pure steppers -------------------------------

    @cached_property
    def packed(self) -> tuple:
        """(k, L, r_max, S_cos, S_sin, C_cos, C_sin) for the integrator cores."""
        big = 1e300 if not np.isfinite(self.r_max) else self.r_max
        return (
            int(self.k),
            float(self.length),
            float(big),
            np.ascontiguousarray(self.S.cos_coeffs),
            np.ascontiguousarray(self.S.sin_coeffs),
            np.ascontiguousarray(self.C.cos_coeffs),
            np.ascontiguousarray(self.C.sin_coeffs),
        )


def make_model_metric(k: int, S: BoundaryFunction, C: BoundaryFunction) -> CuspMetric:
    """Assemble a model metric from explicit boundary data."""
    if S.period != C.period:
        raise ValueError("S and C must share their period")
    return CuspMetric(k=int(k), S=S, C=C, length=float(S.period))


def eval_s(metric: CuspMetric, phi) -> tuple:
    return metric.s_bundle(phi)


def metric_tensor(metric: CuspMetric, r, phi) -> tuple:
    return metric.tensor(r, phi)


# ---------------------------------------------------------------------------
# arc-length reparametrization of embedded curves
# ---------------------------------------------------------------------------


def _speed_series(curve: EmbeddedBoundaryCurve, m: int = 8192):
    """Spectral antiderivative of |x'(t)|: total length and s(t) evaluator."""
    t = np.arange(m) * (_TWO_PI / m)
    vel = curve.point(t, deriv=1)
    speed = np.linalg.norm(vel, axis=-1)
    spec = np.fft.rfft(speed)
    mean = spec[0].real / m
    n = np.arange(1, spec.size)
    # antiderivative of the oscillating part of the interpolant
    anti = np.zeros(spec.size, dtype=complex)
    anti[1:] = spec[1:] / (1j * n)
    if m % 2 == 0:
        anti[-1] = 0.0  # Nyquist sine integrates to a cosine we cannot resolve

    def s_of_t(tq):
        tq = np.asarray(tq, dtype=float)
        ph = np.exp(1j * np.outer(np.atleast_1d(tq), n))
        osc = (ph @ anti[1:]).real * (2.0 / m)
        osc0 = np.sum(anti[1:]).real * (2.0 / m)
        out = mean * np.atleast_1d(tq) + (osc - osc0)
        return out if tq.ndim else float(out[0])

    def speed_of_t(tq):
        v = curve.point(tq, deriv=1)
        return np.linalg.norm(v, axis=-1)

    total = mean * _TWO_PI
    return total, s_of_t, speed_of_t


def _invert_arclength(phi_targets, total, s_of_t, speed_of_t):
    """Solve s(t) = phi for each target by Newton with a monotone seed."""
    phi_targets = np.asarray(phi_targets, dtype=float)
    seeds = phi_targets * (_TWO_PI / total)
    t = seeds.copy()
    for _ in range(50):
        f = s_of_t(t) - phi_targets
        t = t - f / speed_of_t(t)
        if np.max(np.abs(f)) < 1e-13 * total:
            break
    return t


def metric_from_boundary_curve(
    curve: EmbeddedBoundaryCurve,
    k: int = 2,
    *,
    fit_tol: float = 1e-10,
    max_degree: int = 1024,
) -> CuspMetric:
    """Cusp metric induced on a cylinder over an embedded boundary curve.

    The curve is reparametrized by arc length (so C = 1), and
    S(phi) = |u(phi)|^2 is fitted as a Fourier series.  The fit residual is
    recorded on ``metric.S.fit``; a residual above tolerance warns but does
    not fail (rough polyline input degrades gracefully).
    """
    if curve.samples is not None and curve.samples.shape[0] < 64:
        raise ValueError(
            f"resampling density insufficient: {curve.samples.shape[0]} samples < 64"
        )
    curve.check_simple()
    total, s_of_t, speed_of_t = _speed_series(curve)
    if total < 1e-9:
        raise ValueError(f"degenerate curve: length {total:.3e}")

    def resample(phi):
        t = _invert_arclength(np.asarray(phi, float), total, s_of_t, speed_of_t)
        return curve.point(t)

    s_series = BoundaryFunction.from_callable(
        lambda phi: np.sum(resample(phi) ** 2, axis=-1),
        total,
        tol=fit_tol,
        max_degree=max_degree,
    )
    # component fits in arc length feed curvature-based diagnostics
    arc_curve = EmbeddedBoundaryCurve.from_function(
        lambda phi: resample(phi * (total / _TWO_PI)), dim=curve.dim
    )
    metric = CuspMetric(
        k=int(k),
        S=s_series,
        C=BoundaryFunction.constant(1.0, total),
        length=total,
        curve=arc_curve,
    )
    return metric


def arc_components(metric: CuspMetric) -> list[BoundaryFunction]:
    """Arc-length Fourier fits of the source curve's coordinates.

    Only available on metrics built by :func:`metric_from_boundary_curve`.
    The stored curve is parametrized by ``phi * 2 pi / L``, so derivatives
    are rescaled back to arc length here.
    """
    if metric.curve is None:
        raise ValueError("metric was not built from an embedded curve")
    return metric.curve.component_series


def curve_position_velocity_curvature(metric: CuspMetric, phi):
    """u(phi), u'(phi), u''(phi) of the arc-length curve fit."""
    if metric.curve is None:
        raise ValueError("metric was not built from an embedded curve")
    scale = _TWO_PI / metric.length  # stored curve uses t = phi * scale
    t = np.asarray(phi, dtype=float) * scale
    u = metric.curve.point(t)
    du = metric.curve.point(t, 1) * scale
    d2u = metric.curve.point(t, 2) * scale**2
    return u, du, d2u
