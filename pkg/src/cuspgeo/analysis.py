"""Static analysis of the boundary data: critical points of S, linearization
eigen-structure at the corresponding singular points of the rescaled field,
resonance relations, barrier certificates, and the convexity bound.

The damping constant of the boundary system is 2k-1 and the potential carries
a factor k(k-1)/2, so for a critical point with relative Hessian a = S'' / C
the nontrivial eigenvalues are

    lambda_{2,3} = ( -(2k-1) +- sqrt((2k-1)^2 - 2 k(k-1) a) ) / 2,

with the real/spiral split at a_k = (2k-1)^2 / (2k(k-1)).
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DegenerateCriticalPointError, PreconditionError
from .fourier import BoundaryFunction
from .metric import CuspMetric, EmbeddedBoundaryCurve, curve_position_velocity_curvature

__all__ = [
    "MAXIMUM", "MINIMUM", "DEGENERATE",
    "REAL_NODE", "CRITICALLY_DAMPED", "SPIRAL",
    "ConstantS", "CriticalPoint", "EigenData", "BarrierReport", "ConvexityReport",
    "find_critical_points", "eigen_data", "resonance_relations",
    "check_barrier", "convexity_bound", "a_threshold",
]

MAXIMUM = "maximum"
MINIMUM = "minimum"
DEGENERATE = "degenerate"

REAL_NODE = "real-node"
CRITICALLY_DAMPED = "critically-damped"
SPIRAL = "spiral"

LABEL_C1 = "C1"
LABEL_C2 = "C2"
LABEL_RESONANT = "resonant-a-equals-2"
LABEL_NA = "not-applicable"

DEGENERATE_TOL = 1e-10
ROOT_GRID = 4096


def a_threshold(k: int) -> float:
    """Hessian value separating real eigenvalues from spirals: (2k-1)^2/(2k(k-1))."""
    m = 2 * k - 1
    return m * m / (2.0 * k * (k - 1))


@dataclass(frozen=True)
class ConstantS:
    """Marker returned when S is constant (every boundary point is critical)."""

    s_value: float


@dataclass(frozen=True)
class CriticalPoint:
    phi0: float
    type: str
    s_value: float
    a: float                     # S'' / C at phi0
    constant_s_flag: bool = False

    def to_dict(self) -> dict:
        return {
            "phi0": self.phi0,
            "type": self.type,
            "s_value": self.s_value,
            "a": self.a,
        }


@dataclass(frozen=True)
class EigenData:
    lambda1: float
    lambda2: complex
    lambda3: complex
    nu2: tuple
    nu3: tuple
    regime: str
    a: float
    a_k: float
    linearizability: str

    def to_dict(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "lambda2_re": self.lambda2.real,
            "lambda2_im": self.lambda2.imag,
            "lambda3_re": self.lambda3.real,
            "lambda3_im": self.lambda3.imag,
            "regime": self.regime,
            "a": self.a,
            "a_k": self.a_k,
            "linearizability": self.linearizability,
        }


# ---------------------------------------------------------------------------
# critical points
# ---------------------------------------------------------------------------


def _newton_polish(metric: CuspMetric, lo: float, hi: float) -> float:
    """Bisection bracket + Newton on S' with exact Fourier derivatives."""
    s = metric.S
    flo = s(lo, 1)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fmid = s(mid, 1)
        if fmid == 0.0:
            lo = hi = mid
            break
        if flo * fmid > 0.0:
            lo, flo = mid, fmid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    for _ in range(4):
        d1, d2 = s(root, 1), s(root, 2)
        if d2 == 0.0:
            break
        step = d1 / d2
        if abs(step) > (hi - lo) + 1e-6:
            break
        root -= step
    return root


def find_critical_points(metric: CuspMetric):
    """All zeros of S' on one period, in cyclic order, or a ConstantS marker.

    Classification is by the sign of S''; |S''| below 1e-10 flags the point
    degenerate, and downstream Morse-only operations refuse it.
    """
    if metric.constant_s:
        return ConstantS(float(metric.S.cos_coeffs[0]))
    length = metric.length
    grid = np.arange(ROOT_GRID) * (length / ROOT_GRID)
    d1 = metric.S(grid, 1)
    scale = float(np.max(np.abs(d1)))
    roots: list[float] = []
    for i in range(ROOT_GRID):
        j = (i + 1) % ROOT_GRID
        a, b = d1[i], d1[j]
        lo = grid[i]
        hi = grid[i] + length / ROOT_GRID
        if a == 0.0:
            roots.append(float(grid[i]))
        elif a * b < 0.0:
            roots.append(float(metric.wrap(_newton_polish(metric, lo, hi))))
    # dedupe cyclically
    roots = sorted(set(metric.wrap(np.array(roots)).tolist()))
    cleaned: list[float] = []
    for r in roots:
        if cleaned and min(abs(r - cleaned[-1]), length - abs(r - cleaned[-1])) < 1e-9:
            continue
        cleaned.append(r)
    if len(cleaned) > 1 and (length - cleaned[-1]) + cleaned[0] < 1e-9:
        cleaned.pop()
    points = []
    for phi0 in cleaned:
        s_val, s1, s2 = metric.s_bundle(phi0)
        if abs(s1) > 1e-10 * (1.0 + scale):
            continue  # spurious bracket artifact
        if abs(s2) < DEGENERATE_TOL:
            kind = DEGENERATE
        else:
            kind = MAXIMUM if s2 < 0.0 else MINIMUM
        points.append(
            CriticalPoint(phi0=float(phi0), type=kind, s_value=float(s_val),
                          a=float(s2 / metric.C(phi0)))
        )
    return points


# ---------------------------------------------------------------------------
# eigen-structure
# ---------------------------------------------------------------------------


def _is_rational(x: float, max_den: int = 10**6, tol: float = 1e-9) -> bool:
    """Continued-fraction detection; advisory only (floats cannot certify)."""
    approx = Fraction(x).limit_denominator(max_den)
    return abs(float(approx) - x) < tol


def eigen_data(metric: CuspMetric, cp: CriticalPoint) -> EigenData:
    """Eigenvalues and eigenvectors of the linearized field at a critical point.

    The lambda_1 = 1 eigenvector is transverse to r = 0; nu_{2,3} live in the
    boundary (phi, theta) plane as (1, lambda_i C).
    """
    if cp.type == DEGENERATE:
        raise DegenerateCriticalPointError(
            f"critical point at phi={cp.phi0}: |S''| < {DEGENERATE_TOL}"
        )
    k = metric.k
    m = 2 * k - 1
    kappa = metric.kappa
    a = cp.a
    ak = a_threshold(k)
    disc = m * m - 2.0 * kappa * a
    sq = cmath.sqrt(complex(disc, 0.0))
    lam2 = (-m + sq) / 2.0
    lam3 = (-m - sq) / 2.0
    if disc >= 0.0:
        lam2 = complex(lam2.real, 0.0)
        lam3 = complex(lam3.real, 0.0)
    c0 = float(metric.C(cp.phi0))
    nu2 = (1.0 + 0.0j, lam2 * c0)
    nu3 = (1.0 + 0.0j, lam3 * c0)
    if abs(a - ak) < 1e-10:
        regime = CRITICALLY_DAMPED
    elif a > ak:
        regime = SPIRAL
    else:
        regime = REAL_NODE
    label = LABEL_NA
    if cp.type == MINIMUM and a < ak - 1e-10:
        if abs(a - 2.0) < 1e-10:
            label = LABEL_RESONANT
        elif _is_rational(lam2.real):
            label = LABEL_C1
        else:
            label = LABEL_C2
    return EigenData(
        lambda1=1.0, lambda2=lam2, lambda3=lam3, nu2=nu2, nu3=nu3,
        regime=regime, a=a, a_k=ak, linearizability=label,
    )


def resonance_relations(lambdas, degree_bound: int) -> list[tuple[int, int, int, int]]:
    """Integer relations a1 l1 + a2 l2 + a3 l3 = l_i with a1+a2+a3 in [2, bound].

    Returns tuples (i, a1, a2, a3) with i in {1, 2, 3}, matched within 1e-9.
    """
    l1, l2, l3 = (complex(v) for v in lambdas)
    if degree_bound > 20:
        raise ValueError("degree_bound must be <= 20")
    if min(abs(l1 - l2), abs(l1 - l3), abs(l2 - l3)) < 1e-12:
        raise ValueError("eigenvalues must be pairwise distinct")
    out = []
    for a1 in range(degree_bound + 1):
        for a2 in range(degree_bound + 1 - a1):
            for a3 in range(degree_bound + 1 - a1 - a2):
                if a1 + a2 + a3 < 2:
                    continue
                combo = a1 * l1 + a2 * l2 + a3 * l3
                for i, li in enumerate((l1, l2, l3), start=1):
                    if abs(combo - li) < 1e-9:
                        out.append((i, a1, a2, a3))
    return sorted(out)


# ---------------------------------------------------------------------------
# barrier certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BarrierReport:
    """Result of checking a trapping function f on a maximum-to-minimum interval.

    Margins are true extrema over the closed interval (grid-seeded, then
    polished), so they are stable under grid refinement.  Sign conventions:
    every margin is >= 0 (up to 1e-9 slack for the endpoint zeros of the
    default barrier) exactly when its condition holds.
    """

    phi_max: float
    phi_min: float
    direction: int               # +1: increasing phi from the maximum; -1: reflected
    interval_length: float
    cond_a: bool
    cond_c: bool
    cond_b: bool
    cond_b_strict_at_min: bool
    margin_a: float
    margin_c: float
    margin_b: float
    margin_b_strict: float
    barrier_used: str
    grid: int = ROOT_GRID

    @property
    def all_pass(self) -> bool:
        return self.cond_a and self.cond_c and self.cond_b and self.cond_b_strict_at_min

    def to_dict(self) -> dict:
        return {
            "phi_max": self.phi_max,
            "phi_min": self.phi_min,
            "direction": self.direction,
            "cond_a": self.cond_a,
            "cond_c": self.cond_c,
            "cond_b": self.cond_b,
            "cond_b_strict_at_min": self.cond_b_strict_at_min,
            "margin_a": self.margin_a,
            "margin_c": self.margin_c,
            "margin_b": self.margin_b,
            "margin_b_strict": self.margin_b_strict,
            "barrier_used": self.barrier_used,
            "all_pass": self.all_pass,
        }


def _polished_min(fn, delta: float, grid: int) -> float:
    """Minimum of a smooth function over [0, delta]: grid seed + local polish."""
    psi = np.linspace(0.0, delta, grid + 1)
    vals = np.array([fn(p) for p in psi])
    i = int(np.argmin(vals))
    lo = psi[max(i - 1, 0)]
    hi = psi[min(i + 1, grid)]
    if hi <= lo:
        return float(vals[i])
    res = minimize_scalar(fn, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13})
    return float(min(res.fun, vals[i]))


def check_barrier(
    metric: CuspMetric,
    from_max: CriticalPoint,
    to_min: CriticalPoint,
    f: BoundaryFunction | None = None,
    grid: int = ROOT_GRID,
) -> BarrierReport:
    """Check the trapping conditions for the boundary trajectory leaving
    ``from_max`` toward ``to_min``.

    With psi measuring distance from the maximum (after reflection if the
    minimum sits in the -phi direction), the conditions on f >= 0 are:

      (a)  f(delta) = 0 and f > 0 inside,
      (c)  f(0) > 0, or f(0) = 0 and f'(0) > lambda_2(max),
      (b)  f f' + (2k-1) f + k(k-1)/2 S_psi >= 0 on (0, delta),
      (b') f'^2 + (2k-1) f' + k(k-1)/2 S_psipsi < 0 at the minimum.

    The default barrier is f = -(k(k-1)/(2k-1)) S_psi.
    """
    if from_max.type != MAXIMUM or to_min.type != MINIMUM:
        if DEGENERATE in (from_max.type, to_min.type):
            raise DegenerateCriticalPointError("barrier check requires Morse points")
        raise PreconditionError(
            f"need a (maximum, minimum) pair, got ({from_max.type}, {to_min.type})"
        )
    length = metric.length
    crit = find_critical_points(metric)
    if isinstance(crit, ConstantS):
        raise PreconditionError("constant S has no maximum/minimum pair")
    others = [c.phi0 for c in crit
              if min(abs(c.phi0 - from_max.phi0), length - abs(c.phi0 - from_max.phi0)) > 1e-9
              and min(abs(c.phi0 - to_min.phi0), length - abs(c.phi0 - to_min.phi0)) > 1e-9]

    def clear(direction: int) -> float | None:
        delta = (direction * (to_min.phi0 - from_max.phi0)) % length
        for phi_c in others:
            gap = (direction * (phi_c - from_max.phi0)) % length
            if 1e-9 < gap < delta - 1e-9:
                return None
        return delta

    direction, delta = +1, clear(+1)
    if delta is None:
        direction, delta = -1, clear(-1)
    if delta is None:
        raise PreconditionError(
            "no critical-point-free interval from the maximum to the minimum"
        )

    k = metric.k
    m = 2 * k - 1
    kappa = metric.kappa

    def s1(psi):
        return direction * metric.S(from_max.phi0 + direction * psi, 1)

    def s2(psi):
        return metric.S(from_max.phi0 + direction * psi, 2)

    if f is None:
        coef = kappa / m

        def f_val(psi):
            return -coef * s1(psi)

        def f_der(psi):
            return -coef * s2(psi)

        barrier_used = "default: -(k(k-1)/(2k-1)) S_psi"
    else:
        def f_val(psi):
            return float(f(psi))

        def f_der(psi):
            return float(f(psi, 1))

        barrier_used = f"user barrier (degree {f.degree})"

    eig_max = eigen_data(metric, from_max)

    # (a): f(delta) = 0 and min f over the closed interval not below zero
    end_val = f_val(delta)
    margin_a = _polished_min(f_val, delta, grid)
    scale_f = 1.0 + max(abs(f_val(p)) for p in np.linspace(0.0, delta, 65))
    cond_a = abs(end_val) <= 1e-9 * scale_f and margin_a >= -1e-9 * scale_f

    # (c): positive at 0, or zero with slope above lambda_2(max)
    v0 = f_val(0.0)
    if v0 > 1e-12 * scale_f:
        cond_c = True
        margin_c = float(v0)
    elif v0 >= -1e-12 * scale_f:
        margin_c = float(f_der(0.0) - eig_max.lambda2.real)
        cond_c = margin_c > 0.0
    else:
        cond_c = False
        margin_c = float(v0)

    # (b): trapping inequality along the interval
    def g_fn(psi):
        return f_val(psi) * f_der(psi) + m * f_val(psi) + 0.5 * kappa * s1(psi)

    margin_b = _polished_min(g_fn, delta, grid)
    scale_g = 1.0 + max(abs(g_fn(p)) for p in np.linspace(0.0, delta, 65))
    cond_b = margin_b >= -1e-9 * scale_g

    # (b'): strict decrease of g at the minimum endpoint
    fp_end = f_der(delta)
    q = fp_end * fp_end + m * fp_end + 0.5 * kappa * s2(delta)
    margin_strict = float(-q)
    cond_strict = q < 0.0

    return BarrierReport(
        phi_max=from_max.phi0,
        phi_min=to_min.phi0,
        direction=direction,
        interval_length=float(delta),
        cond_a=bool(cond_a),
        cond_c=bool(cond_c),
        cond_b=bool(cond_b),
        cond_b_strict_at_min=bool(cond_strict),
        margin_a=float(margin_a),
        margin_c=float(margin_c),
        margin_b=float(margin_b),
        margin_b_strict=margin_strict,
        barrier_used=barrier_used,
        grid=grid,
    )


# ---------------------------------------------------------------------------
# convexity bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvexityReport:
    sup_s2_direct: float          # sup S'' from the Fourier fit of |u|^2
    sup_s2_curvature: float       # sup 2 (1 + u . u'') from the curve fit
    max_discrepancy: float        # pointwise max |difference| over the grid
    bound_satisfied: bool         # sup S'' < 2

    def to_dict(self) -> dict:
        return {
            "sup_s2_direct": self.sup_s2_direct,
            "sup_s2_curvature": self.sup_s2_curvature,
            "max_discrepancy": self.max_discrepancy,
            "bound_satisfied": self.bound_satisfied,
        }


def convexity_bound(source, grid: int = ROOT_GRID) -> ConvexityReport:
    """sup S'' computed two ways: direct differentiation of the |u|^2 fit and
    the curvature identity S'' = 2 (1 + u . K) in arc length.

    ``source`` is an embedded boundary curve or a metric built from one.
    The bound of interest is sup S'' < 2 (guaranteed when the curve bounds a
    strictly convex set containing the origin).
    """
    from .metric import metric_from_boundary_curve

    if isinstance(source, EmbeddedBoundaryCurve):
        metric = metric_from_boundary_curve(source, k=2)
    elif isinstance(source, CuspMetric):
        if source.curve is None:
            raise ValueError("metric does not carry its source curve")
        metric = source
    else:
        raise TypeError(f"expected a curve or curve-built metric, got {type(source)}")

    phis = np.arange(grid) * (metric.length / grid)
    s2_direct = metric.S(phis, 2)
    u, _, d2u = curve_position_velocity_curvature(metric, phis)
    s2_curv = 2.0 * (1.0 + np.sum(u * d2u, axis=-1))
    # polish the direct supremum on the second-derivative series
    n = np.arange(metric.S.degree + 1)
    w = 2.0 * np.pi / metric.length
    d2_series = BoundaryFunction(
        -(n * w) ** 2 * metric.S.cos_coeffs,
        -((n[1:] * w) ** 2) * metric.S.sin_coeffs,
        metric.length,
    )
    sup_direct = d2_series.minmax()[1]
    return ConvexityReport(
        sup_s2_direct=float(sup_direct),
        sup_s2_curvature=float(np.max(s2_curv)),
        max_discrepancy=float(np.max(np.abs(s2_direct - s2_curv))),
        bound_satisfied=bool(sup_direct < 2.0),
    )
