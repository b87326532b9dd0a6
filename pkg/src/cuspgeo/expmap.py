"""The exponential map at the singularity, as an ordered atlas of geodesics.

Geodesics leaving the singular point all start at critical points of S: each
maximum emits a two-parameter fan (directions in the span of the r-eigenvector
and the boundary unstable eigenvector), each minimum a single geodesic.
Labels q live on R/KZ with K the number of maxima: integer labels are the
minimum geodesics, the fan of the j-th maximum fills (j, j+1).

For constant S every boundary point emits one radial geodesic and labels are
R/Z-valued boundary positions.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import (
    MAXIMUM,
    MINIMUM,
    SPIRAL,
    ConstantS,
    CriticalPoint,
    eigen_data,
    find_critical_points,
)
from .dynamics import (
    BoundaryState,
    PhasePoint,
    Trajectory,
    boundary_energy,
    energy,
    integrate,
    shell_point,
)
from .errors import DegenerateCriticalPointError, PreconditionError
from .metric import CuspMetric

__all__ = [
    "AtlasGeodesic",
    "ExpAtlas",
    "ExpEvalResult",
    "CrossingPair",
    "LevelReport",
    "InjectivityReport",
    "SurjectivityReport",
    "HeteroclinicResult",
    "BackwardCheckResult",
    "shoot_unstable",
    "classify_heteroclinic",
    "build_atlas",
    "exp_eval",
    "injectivity_report",
    "surjectivity_report",
    "backward_start_check",
]

EPS_MIN, EPS_MAX = 1e-8, 1e-4
CROSSING_PHI_TOL = 1e-7
RICHARDSON_WARN = 1e-4
DEFAULT_T_MAX = 200.0


def _cyc(delta: float, period: float) -> float:
    """Shortest signed representative of delta modulo period."""
    return (delta + 0.5 * period) % period - 0.5 * period


# ---------------------------------------------------------------------------
# shooting from singular points
# ---------------------------------------------------------------------------


def _launch(metric, phi0, direction, eps, tau_limit, t_max, tol, label):
    d = np.asarray(direction, dtype=float)
    nrm = float(np.linalg.norm(d))
    if nrm == 0.0:
        raise ValueError("direction must be nonzero")
    d = d / nrm
    if d[0] < 0.0:
        raise ValueError("direction must not point to negative r")
    r0 = eps * d[0]
    phi_start = phi0 + eps * d[1]
    theta0 = eps * d[2]
    start = shell_point(metric, r0, phi_start, theta0, xi_sign=+1)
    limit = None if tau_limit is None else max(tau_limit - r0, 0.0)
    traj = integrate(
        metric, start, (0.0, t_max), tol, tau_limit=limit, start_label=label
    )
    # arc length is measured from the singular point: r' = 1 + O(r^(2k-2))
    # near the start, so the launch offset contributes r0 of arc length.
    traj = replace(traj, tau=traj.tau + r0)
    return traj, d


def _curve_deviation(a: Trajectory, b: Trajectory, length: float, n: int = 33) -> float:
    lo = max(a.tau[0], b.tau[0])
    hi = min(a.tau[-1], b.tau[-1])
    if hi <= lo:
        return np.inf
    dev = 0.0
    taus = np.linspace(lo, hi, n)
    rbar = 0.0
    rows = []
    for tq in taus:
        sa = a.state_at_tau(float(tq))
        sb = b.state_at_tau(float(tq))
        rbar += 0.5 * (sa[0] + sb[0]) / n
        rows.append((sa[0] - sb[0], _cyc(sa[1] - sb[1], length)))
    for dr, dphi in rows:
        dev = max(dev, float(np.hypot(dr, rbar * dphi)))
    return dev


def shoot_unstable(
    metric: CuspMetric,
    cp: CriticalPoint,
    direction,
    eps: float = 1e-6,
    *,
    tau_limit: float | None = None,
    t_max: float = DEFAULT_T_MAX,
    tol: float = 1e-10,
    richardson: bool = True,
    label: str = "",
) -> Trajectory:
    """Launch a geodesic from the singular point over ``cp`` along an
    unstable direction, offset by ``eps``.

    ``direction`` has components (r, phi, theta) and must lie in the unstable
    span: for maxima any combination of the r-eigenvector and the boundary
    eigenvector, for minima only the r-eigenvector (the unstable manifold is
    one-dimensional there).  xi is solved from the shell condition.  A
    half-offset relaunch bounds the first-order manifold error; its deviation
    is stored in ``meta['richardson_dev']`` and flagged above 1e-4.
    """
    if cp.type == "degenerate":
        raise DegenerateCriticalPointError("cannot shoot from a degenerate point")
    if not EPS_MIN <= eps <= EPS_MAX:
        raise ValueError(f"eps={eps} outside [{EPS_MIN}, {EPS_MAX}]")
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    if cp.type == MINIMUM and (abs(d[1]) > 1e-12 or abs(d[2]) > 1e-12):
        raise PreconditionError(
            "minima admit only the r-direction (one-dimensional unstable manifold)"
        )
    traj, d = _launch(metric, cp.phi0, d, eps, tau_limit, t_max, tol, label)
    meta = dict(traj.meta)
    meta.update(source_phi0=cp.phi0, source_type=cp.type, eps=eps,
                direction=tuple(d.tolist()))
    if richardson and d[0] > 0.0:
        half, _ = _launch(metric, cp.phi0, d, 0.5 * eps, tau_limit, t_max, tol, label)
        dev = _curve_deviation(traj, half, metric.length)
        meta["richardson_dev"] = dev
        meta["richardson_warn"] = bool(dev > RICHARDSON_WARN)
    return replace(traj, meta=meta)


# ---------------------------------------------------------------------------
# Morse skeleton and labels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Skeleton:
    maxima: list            # in cyclic order, starting from the first maximum
    minima: list            # minima[j] follows maxima[j]
    length: float

    @property
    def count(self) -> int:
        return len(self.maxima)


def _skeleton(metric: CuspMetric) -> _Skeleton:
    crit = find_critical_points(metric)
    if isinstance(crit, ConstantS):
        raise PreconditionError("constant S: there are no maxima")
    if any(c.type == "degenerate" for c in crit):
        raise DegenerateCriticalPointError("S has a degenerate critical point")
    crit = sorted(crit, key=lambda c: c.phi0)
    first_max = next(i for i, c in enumerate(crit) if c.type == MAXIMUM)
    crit = crit[first_max:] + crit[:first_max]
    maxima = crit[0::2]
    minima = crit[1::2]
    if any(c.type != MAXIMUM for c in maxima) or any(c.type != MINIMUM for c in minima):
        raise PreconditionError("maxima and minima do not alternate")
    return _Skeleton(maxima=maxima, minima=minima, length=metric.length)


# ---------------------------------------------------------------------------
# heteroclinic classification on the boundary
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HeteroclinicResult:
    outcome: str                  # monotone-convergence | spiral-convergence | passes-through
    target_phi: float             # the adjacent minimum in the chosen direction
    crossing_times: np.ndarray    # times at which phi crosses the minimum
    theta_at_min: float | None    # theta at the first crossing (passes-through payload)
    e_first_crossing: float | None
    e_next_max: float | None
    trajectory: Trajectory

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "target_phi": self.target_phi,
            "crossing_count": int(self.crossing_times.size),
            "crossing_times": self.crossing_times.tolist(),
            "theta_at_min": self.theta_at_min,
            "e_first_crossing": self.e_first_crossing,
            "e_next_max": self.e_next_max,
        }


def _unwrapped_phi(traj: Trajectory, length: float) -> np.ndarray:
    phi = traj.phi.copy()
    out = phi.copy()
    for i in range(1, phi.size):
        out[i] = out[i - 1] + _cyc(phi[i] - phi[i - 1], length)
    return out


def classify_heteroclinic(
    metric: CuspMetric,
    max_cp: CriticalPoint,
    side: int = +1,
    *,
    eps: float = 1e-8,
    t_max: float = 400.0,
    tol: float = 1e-10,
) -> HeteroclinicResult:
    """Integrate the boundary unstable trajectory leaving ``max_cp`` in the
    chosen direction and classify its fate.

    monotone-convergence: reaches the adjacent minimum without oscillation
    (at most two crossings of its angle); spiral-convergence: converges while
    crossing the minimum angle three or more times; passes-through: escapes
    past the minimum toward the next critical pair (theta at the first
    crossing is reported, along with the boundary energies that decide the
    escape).
    """
    if max_cp.type != MAXIMUM:
        raise PreconditionError(f"need a maximum, got {max_cp.type}")
    if side not in (+1, -1):
        raise ValueError("side must be +1 or -1")
    skel = _skeleton(metric)
    length = metric.length
    idx = min(
        range(skel.count),
        key=lambda j: abs(_cyc(skel.maxima[j].phi0 - max_cp.phi0, length)),
    )
    target = skel.minima[idx] if side == +1 else skel.minima[(idx - 1) % skel.count]
    next_max = skel.maxima[(idx + 1) % skel.count] if side == +1 \
        else skel.maxima[(idx - 1) % skel.count]

    eig = eigen_data(metric, max_cp)
    lam2 = eig.lambda2.real
    c0 = float(metric.C(max_cp.phi0))
    start = BoundaryState(max_cp.phi0 + side * eps, side * eps * lam2 * c0)
    traj = integrate(metric, start, (0.0, t_max), tol,
                     start_label=f"boundary-unstable:{max_cp.phi0:.6f}:{side:+d}")

    phi_u = _unwrapped_phi(traj, length)
    delta = (side * (target.phi0 - max_cp.phi0)) % length
    target_u = phi_u[0] + side * delta - side * eps  # unwrapped angle of the minimum

    crossings = []
    thetas = []
    g = phi_u - target_u
    for i in range(len(traj) - 1):
        if g[i] == 0.0 or g[i] * g[i + 1] < 0.0:
            h = traj.t[i + 1] - traj.t[i]
            a, b = 0.0, 1.0
            for _ in range(60):
                mid = 0.5 * (a + b)
                val = _hermite_scalar(g[i], traj.derivs[i, 0 if traj.kind == "boundary" else 1],
                                      g[i + 1],
                                      traj.derivs[i + 1, 0 if traj.kind == "boundary" else 1],
                                      h, mid)
                if val * g[i] > 0.0:
                    a = mid
                else:
                    b = mid
            s = 0.5 * (a + b)
            t_cross = traj.t[i] + s * h
            state = traj.state_at(float(t_cross))
            crossings.append(float(t_cross))
            thetas.append(float(state[1]))
    crossing_times = np.asarray(crossings)

    end = traj.states[-1]
    end_phi, end_theta = float(end[0]), float(end[1])
    at_target = (
        abs(_cyc(end_phi - target.phi0, length)) < 1e-3 and abs(end_theta) < 1e-3
    )
    e_first = None
    e_next = None
    theta_at_min = None
    if crossing_times.size:
        theta_at_min = thetas[0]
        e_first = boundary_energy(metric, BoundaryState(target.phi0, thetas[0]))
        e_next = boundary_energy(metric, BoundaryState(next_max.phi0, 0.0))

    if at_target:
        outcome = "spiral-convergence" if crossing_times.size > 2 else "monotone-convergence"
    else:
        outcome = "passes-through"
    return HeteroclinicResult(
        outcome=outcome,
        target_phi=target.phi0,
        crossing_times=crossing_times,
        theta_at_min=theta_at_min,
        e_first_crossing=e_first,
        e_next_max=e_next,
        trajectory=traj,
    )


def _hermite_scalar(y0, f0, y1, f1, h, s):
    s2 = s * s
    s3 = s2 * s
    return ((2 * s3 - 3 * s2 + 1) * y0 + h * (s3 - 2 * s2 + s) * f0
            + (-2 * s3 + 3 * s2) * y1 + h * (s3 - s2) * f1)


# ---------------------------------------------------------------------------
# the atlas
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AtlasGeodesic:
    label: float
    trajectory: Trajectory
    source_phi0: float
    source_type: str              # maximum | minimum | boundary-point
    alpha: float | None = None    # fan angle for maximum-sourced geodesics


@dataclass(frozen=True)
class ExpAtlas:
    """Cyclically ordered family of geodesics realizing the exponential map."""

    metric: CuspMetric
    kind: str                     # "morse" | "constant"
    geodesics: list
    tau0: float                   # requested horizon
    tau0_effective: float         # common horizon actually reached
    fan_size: int
    eps: float
    label_period: float           # K for Morse (number of maxima), 1 for constant
    maxima: list = field(default_factory=list)
    minima: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def labels(self) -> np.ndarray:
        return np.array([g.label for g in self.geodesics])

    def nearest(self, q: float) -> tuple:
        """(geodesic, cyclic label gap) for the label closest to q."""
        gaps = [abs(_cyc(g.label - q, self.label_period)) for g in self.geodesics]
        i = int(np.argmin(gaps))
        return self.geodesics[i], float(gaps[i])

    def minimum_geodesic(self, j: int) -> AtlasGeodesic:
        """Geodesic at integer label j+1 (the minimum following maximum j)."""
        target = (j + 1) % self.label_period
        geo, gap = self.nearest(target)
        if gap > 1e-9:
            raise ValueError(f"no geodesic at integer label {target}")
        return geo


def _thread_count() -> int:
    env = os.environ.get("CUSPGEO_THREADS", "1")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def _fan_alphas(fan_size: int) -> np.ndarray:
    # midpoint grid on (0, pi): endpoints are the boundary trajectories
    j = np.arange(fan_size)
    return np.pi * (2 * j + 1) / (2 * fan_size)


def build_atlas(
    metric: CuspMetric,
    tau0: float = 0.05,
    fan_size: int = 64,
    *,
    eps: float = 1e-6,
    tol: float = 1e-10,
    t_max: float = DEFAULT_T_MAX,
    richardson: bool = True,
) -> ExpAtlas:
    """Launch the full ordered family of geodesics up to arc length tau0.

    Morse metrics get ``fan_size`` trajectories per maximum (uniform angles in
    the unstable plane) plus one per minimum; constant-S metrics get one
    radial geodesic per uniform boundary grid point.
    """
    if fan_size < 8:
        raise ValueError("fan_size must be >= 8")
    if tau0 <= 0:
        raise ValueError("tau0 must be positive")
    warnings_list: list[str] = []
    if np.isfinite(metric.r_max) and tau0 > 0.9 * metric.r_max:
        warnings_list.append(
            f"tau0={tau0} exceeds the domain horizon ~{metric.r_max:.4g}; "
            "geodesics will truncate at the domain edge"
        )

    crit = find_critical_points(metric)
    entries: list[AtlasGeodesic] = []

    if isinstance(crit, ConstantS):
        n = fan_size
        phis = np.arange(n) * (metric.length / n)

        def shoot_radial(i):
            start = shell_point(metric, eps, float(phis[i]), 0.0)
            traj = integrate(metric, start, (0.0, t_max), tol,
                             tau_limit=max(tau0 - eps, 0.0),
                             start_label=f"radial:{phis[i]:.6f}")
            traj = replace(traj, tau=traj.tau + eps)
            return AtlasGeodesic(label=float(i) / n, trajectory=traj,
                                 source_phi0=float(phis[i]),
                                 source_type="boundary-point")

        entries = _dispatch(shoot_radial, range(n))
        kind = "constant"
        label_period = 1.0
        maxima: list = []
        minima: list = []
    else:
        skel = _skeleton(metric)
        maxima = skel.maxima
        minima = skel.minima
        kcount = skel.count
        alphas = _fan_alphas(fan_size)
        jobs = []
        for j, mx in enumerate(maxima):
            eig = eigen_data(metric, mx)
            c0 = float(metric.C(mx.phi0))
            nu2 = np.array([0.0, 1.0, eig.lambda2.real * c0])
            nu2 /= np.linalg.norm(nu2)
            v1 = np.array([1.0, 0.0, 0.0])
            for a in alphas:
                direction = np.cos(a) * nu2 + np.sin(a) * v1
                label = (j + 1) - a / np.pi
                jobs.append(("fan", mx, direction, float(label), float(a)))
        for j, mn in enumerate(minima):
            jobs.append(("min", mn, np.array([1.0, 0.0, 0.0]),
                         float((j + 1) % kcount), None))

        def shoot_job(job):
            kind_j, cp, direction, label, alpha = job
            traj = shoot_unstable(
                metric, cp, direction, eps,
                tau_limit=tau0, t_max=t_max, tol=tol, richardson=richardson,
                label=f"{kind_j}:{cp.phi0:.6f}:{label:.6f}",
            )
            return AtlasGeodesic(label=label, trajectory=traj,
                                 source_phi0=cp.phi0, source_type=cp.type,
                                 alpha=alpha)

        entries = _dispatch(shoot_job, jobs)
        kind = "morse"
        label_period = float(kcount)

    entries.sort(key=lambda g: g.label)
    tau_ends = [float(g.trajectory.tau[-1]) for g in entries]
    tau_eff = min(tau_ends) if tau_ends else 0.0
    if tau_eff < tau0 - 1e-12:
        warnings_list.append(
            f"common horizon truncated to {tau_eff:.6g} (requested {tau0})"
        )
    return ExpAtlas(
        metric=metric, kind=kind, geodesics=entries, tau0=tau0,
        tau0_effective=min(tau_eff, tau0), fan_size=fan_size, eps=eps,
        label_period=label_period, maxima=maxima, minima=minima,
        warnings=warnings_list,
    )


def _dispatch(fn, jobs):
    workers = _thread_count()
    jobs = list(jobs)
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpEvalResult:
    r: float
    phi: float
    label_used: float
    label_gap: float              # 0 for an exact label hit
    extrapolated: bool            # tau below the geodesic's launch offset


def exp_eval(atlas: ExpAtlas, q: float, tau: float) -> ExpEvalResult:
    """Evaluate the atlas exponential map at label q and arc length tau.

    Between-label queries use the nearest geodesic; the gap is reported so
    callers can treat the result as the discrete approximation it is.
    """
    if not (0.0 < tau <= atlas.tau0_effective):
        raise ValueError(
            f"tau={tau} outside (0, {atlas.tau0_effective}]"
        )
    geo, gap = atlas.nearest(float(q))
    traj = geo.trajectory
    if tau < traj.tau[0]:
        state = traj.states[0]
        return ExpEvalResult(float(state[0]), float(atlas.metric.wrap(state[1])),
                             geo.label, gap, True)
    state = traj.state_at_tau(float(tau))
    return ExpEvalResult(float(state[0]), float(atlas.metric.wrap(state[1])),
                         geo.label, gap, False)


# ---------------------------------------------------------------------------
# injectivity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CrossingPair:
    q_a: float
    q_b: float
    r: float
    phi: float
    separation: float             # cyclic phi distance at the level
    refined: bool = False
    alpha: float | None = None    # fan angle of the refined geodesic, if any

    def to_dict(self) -> dict:
        return {
            "q_a": self.q_a, "q_b": self.q_b, "r": self.r, "phi": self.phi,
            "separation": self.separation, "refined": self.refined,
            "alpha": self.alpha,
        }


@dataclass(frozen=True)
class LevelReport:
    level: float
    reached: int                  # geodesics crossing this level
    winding: int
    order_violations: list        # (q_a, q_b, phi_a, phi_b)
    crossings: list               # CrossingPair

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "reached": self.reached,
            "winding": self.winding,
            "order_violations": [list(v) for v in self.order_violations],
            "crossings": [c.to_dict() for c in self.crossings],
        }


@dataclass(frozen=True)
class InjectivityReport:
    levels: list
    reports: list
    verdict: str                  # "injective" | "crossings-found"
    smallest_crossing_r: float | None
    skipped_levels: list

    def to_dict(self) -> dict:
        return {
            "levels": list(self.levels),
            "verdict": self.verdict,
            "smallest_crossing_r": self.smallest_crossing_r,
            "skipped_levels": list(self.skipped_levels),
            "reports": [r.to_dict() for r in self.reports],
        }


def _first_crossing_phi(traj: Trajectory, level: float) -> float | None:
    hits = traj.crossings_r(level)
    if not hits:
        return None
    return float(hits[0][1][1])


def _fan_shoot_phi(atlas, mx, eig, alpha, level):
    """phi (mod L) where a fresh fan geodesic at angle alpha crosses level."""
    metric = atlas.metric
    c0 = float(metric.C(mx.phi0))
    nu2 = np.array([0.0, 1.0, eig.lambda2.real * c0])
    nu2 /= np.linalg.norm(nu2)
    direction = np.cos(alpha) * nu2 + np.sin(alpha) * np.array([1.0, 0.0, 0.0])
    traj = shoot_unstable(metric, mx, direction, atlas.eps,
                          tau_limit=atlas.tau0, t_max=DEFAULT_T_MAX,
                          richardson=False)
    hits = traj.crossings_r(level)
    if not hits:
        return None
    return float(metric.wrap(hits[0][1][1]))


def _refine_spiral_min(atlas, j_min, level, max_shots=140):
    """Exhibit fan geodesics coinciding with the minimum geodesic at a level.

    A spiral minimum makes the fan angles of the adjacent maxima oscillate
    across the minimum geodesic as alpha approaches the fan edge; uniform
    sampling cannot resolve the exponentially clustered coincidences, so this
    scans alpha geometrically toward the edge and bisects each sign change of
    the angular offset from the minimum geodesic.
    """
    metric = atlas.metric
    length = metric.length
    kcount = int(atlas.label_period)
    min_label = float((j_min + 1) % kcount)
    try:
        geo_min = atlas.minimum_geodesic(j_min)
    except ValueError:
        return []
    target = _first_crossing_phi(geo_min.trajectory, level)
    if target is None:
        return []
    target = float(metric.wrap(target))

    pairs = []
    # side +1: fan of the preceding maximum, alpha -> 0
    # side -1: fan of the following maximum, alpha -> pi
    for side in (+1, -1):
        if side == +1:
            j_max = j_min
        else:
            j_max = (j_min + 1) % kcount
        mx = atlas.maxima[j_max]
        eig = eigen_data(metric, mx)

        def alpha_of(beta, side=side):
            # beta measures distance from the fan edge nearest this minimum
            return beta if side == +1 else np.pi - beta

        def delta_of(beta, side=side, j_max=j_max, mx=mx, eig=eig):
            phi_hit = _fan_shoot_phi(atlas, mx, eig, alpha_of(beta, side), level)
            if phi_hit is None:
                return None
            return _cyc(phi_hit - target, length)

        shots = 0
        prev = None               # (beta, delta)
        bracket = None
        beta = _fan_alphas(atlas.fan_size)[0]
        while shots < max_shots and beta > 1e-13:
            delta = delta_of(beta)
            shots += 1
            if delta is not None:
                if prev is not None and delta * prev[1] < 0.0:
                    bracket = (beta, delta, prev[0], prev[1])
                    break
                prev = (beta, delta)
            beta *= 0.5
        if bracket is None:
            continue
        b_lo, d_lo, b_hi, d_hi = bracket
        best = None
        while shots < max_shots:
            mid = 0.5 * (b_lo + b_hi)
            d_mid = delta_of(mid)
            shots += 1
            if d_mid is None:
                break
            best = (mid, d_mid)
            if abs(d_mid) < 1e-9:
                break
            if d_mid * d_lo > 0.0:
                b_lo, d_lo = mid, d_mid
            else:
                b_hi, d_hi = mid, d_mid
        if best is not None and abs(best[1]) < CROSSING_PHI_TOL:
            beta_star, delta_star = best
            alpha_star = alpha_of(beta_star)
            label = (j_max + 1) - alpha_star / np.pi
            pairs.append(
                CrossingPair(
                    q_a=float(label % atlas.label_period), q_b=min_label,
                    r=level, phi=float(metric.wrap(target + 0.5 * delta_star)),
                    separation=abs(delta_star), refined=True, alpha=float(alpha_star),
                )
            )
    return pairs


def injectivity_report(
    atlas: ExpAtlas, r_levels, *, refine: bool = True
) -> InjectivityReport:
    """Check, level by level, whether distinct labels land on distinct angles.

    Reports (i) coincidences within 1e-7 of cyclic angle among the sampled
    geodesics, (ii) cyclic-order violations of angle versus label, and, for
    spiral minima, (iii) refined coincidence pairs obtained by shooting extra
    fan geodesics toward the minimum geodesic.  The verdict is
    'crossings-found' exactly when some coincidence pair was exhibited.
    """
    if atlas.fan_size < 32 and atlas.kind == "morse":
        raise PreconditionError("injectivity analysis needs fan_size >= 32")
    length = atlas.metric.length
    reports = []
    skipped = []
    smallest = None
    for level in r_levels:
        level = float(level)
        entries = []
        all_hits = []
        for geo in atlas.geodesics:
            hits = geo.trajectory.crossings_r(level)
            if hits:
                first_phi = float(atlas.metric.wrap(hits[0][1][1]))
                entries.append((geo.label, first_phi))
                for _t, state in hits:
                    all_hits.append((geo.label, float(atlas.metric.wrap(state[1]))))
        if len(entries) < 2:
            skipped.append(level)
            continue
        entries.sort(key=lambda e: e[0])
        phis = np.array([e[1] for e in entries])
        labels = [e[0] for e in entries]
        steps = np.mod(np.diff(np.append(phis, phis[0] + 0.0)), length)
        winding = int(round(float(np.sum(steps)) / length))
        violations = []
        for i in range(len(entries)):
            jn = (i + 1) % len(entries)
            e = _cyc(phis[jn] - phis[i], length)
            if e < -CROSSING_PHI_TOL:
                violations.append((labels[i], labels[jn], float(phis[i]), float(phis[jn])))
        crossings = []
        for i in range(len(all_hits)):
            for j in range(i + 1, len(all_hits)):
                qa, pa = all_hits[i]
                qb, pb = all_hits[j]
                if abs(_cyc(qa - qb, atlas.label_period)) < 1e-12:
                    continue
                sep = abs(_cyc(pa - pb, length))
                if sep < CROSSING_PHI_TOL:
                    crossings.append(
                        CrossingPair(q_a=qa, q_b=qb, r=level,
                                     phi=float(atlas.metric.wrap(0.5 * (pa + pb))),
                                     separation=sep)
                    )
        if refine and atlas.kind == "morse":
            for j_min, mn in enumerate(atlas.minima):
                if eigen_data(atlas.metric, mn).regime == SPIRAL:
                    crossings.extend(_refine_spiral_min(atlas, j_min, level))
        if crossings:
            smallest = level if smallest is None else min(smallest, level)
        reports.append(
            LevelReport(level=level, reached=len(entries), winding=winding,
                        order_violations=violations, crossings=crossings)
        )
    verdict = "crossings-found" if any(r.crossings for r in reports) else "injective"
    return InjectivityReport(
        levels=[float(v) for v in r_levels], reports=reports, verdict=verdict,
        smallest_crossing_r=smallest, skipped_levels=skipped,
    )


# ---------------------------------------------------------------------------
# surjectivity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SurjectivityReport:
    fraction: float
    covered: int
    total: int
    uncovered: list               # (i, j, r_center, phi_center)
    max_multiplicity: int         # most distinct geodesics meeting one cell
    grid: tuple

    def to_dict(self) -> dict:
        return {
            "fraction": self.fraction,
            "covered": self.covered,
            "total": self.total,
            "uncovered": [list(u) for u in self.uncovered],
            "max_multiplicity": self.max_multiplicity,
            "grid": [list(self.grid[0]), list(self.grid[1])],
        }


def surjectivity_report(atlas: ExpAtlas, grid) -> SurjectivityReport:
    """Mark grid cells visited by atlas geodesics (within half a cell diagonal).

    ``grid = ((r_lo, r_hi, nr), (phi_lo, phi_hi, nphi))``; the angular range
    wraps when it spans the full boundary length.
    """
    (r_lo, r_hi, nr), (phi_lo, phi_hi, nphi) = grid
    nr, nphi = int(nr), int(nphi)
    length = atlas.metric.length
    dr = (r_hi - r_lo) / nr
    dphi = (phi_hi - phi_lo) / nphi
    half_diag = 0.5 * float(np.hypot(dr, dphi))
    wraps = abs((phi_hi - phi_lo) - length) < 1e-9
    r_centers = r_lo + dr * (np.arange(nr) + 0.5)
    phi_centers = phi_lo + dphi * (np.arange(nphi) + 0.5)

    counts = np.zeros((nr, nphi), dtype=int)
    for geo in atlas.geodesics:
        traj = geo.trajectory
        visited = np.zeros((nr, nphi), dtype=bool)
        pts_r = []
        pts_phi = []
        for i in range(len(traj) - 1):
            h = traj.t[i + 1] - traj.t[i]
            span_r = abs(traj.r[i + 1] - traj.r[i])
            span_p = abs(_cyc(traj.phi[i + 1] - traj.phi[i], length))
            nsub = int(min(64, max(1, np.ceil(4 * max(span_r / dr, span_p / dphi)))))
            ss = np.linspace(0.0, 1.0, nsub + 1)[:-1]
            for s in ss:
                st = _hermite_pair(traj, i, h, s)
                pts_r.append(st[0])
                pts_phi.append(st[1])
        pts_r.append(float(traj.r[-1]))
        pts_phi.append(float(traj.phi[-1]))
        pr = np.asarray(pts_r)
        pp = np.mod(np.asarray(pts_phi) - phi_lo, length) + phi_lo if wraps \
            else np.asarray(pts_phi)
        for r_val, phi_val in zip(pr, pp):
            ci = int(np.floor((r_val - r_lo) / dr))
            cj = int(np.floor((phi_val - phi_lo) / dphi))
            for di in (-1, 0, 1):
                ii = ci + di
                if ii < 0 or ii >= nr:
                    continue
                for dj in (-1, 0, 1):
                    jj = cj + dj
                    if wraps:
                        jj %= nphi
                    elif jj < 0 or jj >= nphi:
                        continue
                    if visited[ii, jj]:
                        continue
                    gap_phi = phi_val - phi_centers[jj]
                    if wraps:
                        gap_phi = _cyc(gap_phi, length)
                    d = np.hypot(r_val - r_centers[ii], gap_phi)
                    if d <= half_diag:
                        visited[ii, jj] = True
        counts += visited
    covered = int(np.count_nonzero(counts))
    total = nr * nphi
    uncovered = [
        (int(i), int(j), float(r_centers[i]), float(phi_centers[j]))
        for i in range(nr) for j in range(nphi) if counts[i, j] == 0
    ]
    return SurjectivityReport(
        fraction=covered / total, covered=covered, total=total,
        uncovered=uncovered, max_multiplicity=int(counts.max()), grid=grid,
    )


def _hermite_pair(traj: Trajectory, i: int, h: float, s: float):
    cols = traj.states.shape[1]
    return _hermite_vec(traj.states[i], traj.derivs[i, :cols],
                        traj.states[i + 1], traj.derivs[i + 1, :cols], h, s)


def _hermite_vec(y0, f0, y1, f1, h, s):
    s2 = s * s
    s3 = s2 * s
    return ((2 * s3 - 3 * s2 + 1) * y0 + h * (s3 - 2 * s2 + s) * f0
            + (-2 * s3 + 3 * s2) * y1 + h * (s3 - s2) * f1)


# ---------------------------------------------------------------------------
# backward start check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BackwardCheckResult:
    verdict: str                  # "converged" | "inconclusive"
    endpoint_phi: float
    endpoint_theta: float
    residual_s_phi: float
    residual_theta: float
    nearest: CriticalPoint | None
    trajectory: Trajectory

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "endpoint_phi": self.endpoint_phi,
            "residual_s_phi": self.residual_s_phi,
            "residual_theta": self.residual_theta,
            "nearest_phi0": None if self.nearest is None else self.nearest.phi0,
        }


def backward_start_check(
    metric: CuspMetric,
    point: PhasePoint,
    *,
    t_budget: float = 60.0,
    r_stop: float = 1e-10,
    tol: float = 1e-10,
) -> BackwardCheckResult:
    """Trace a shell point backward toward its starting point on the boundary.

    Conclusive runs end with r below ``r_stop`` (or field convergence); the
    residuals |S_phi| and |theta| at the endpoint measure how precisely the
    endpoint is a singular point.  Runs that exit the domain backward are
    inconclusive (the geodesic's initial part was not contained near the
    boundary).
    """
    e = energy(metric, point)
    if abs(e - 0.5) > 1e-6:
        raise PreconditionError(f"point is off the unit-speed shell: E={e}")
    if point.xi <= 0.5:
        raise PreconditionError(f"need xi > 1/2 (outgoing geodesic), got {point.xi}")
    if point.r >= metric.r_max:
        raise PreconditionError(f"r={point.r} is not inside the domain")
    traj = integrate(metric, point, (0.0, -t_budget), tol, r_floor=r_stop,
                     start_label="backward-check")
    end = traj.integration_endpoint()
    phi_e = float(metric.wrap(end[1]))
    theta_e = float(end[3])
    res_s = abs(float(metric.S(phi_e, 1)))
    verdict = "converged"
    if traj.stop_reason == "left-domain" or traj.stop_reason == "step-failure":
        verdict = "inconclusive"
    crit = find_critical_points(metric)
    nearest = None
    if not isinstance(crit, ConstantS):
        nearest = min(
            crit, key=lambda c: abs(_cyc(c.phi0 - phi_e, metric.length))
        )
    return BackwardCheckResult(
        verdict=verdict,
        endpoint_phi=phi_e,
        endpoint_theta=theta_e,
        residual_s_phi=res_s,
        residual_theta=abs(theta_e),
        nearest=nearest,
        trajectory=traj,
    )
