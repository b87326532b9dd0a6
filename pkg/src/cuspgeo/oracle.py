"""Brute-force geodesic integration directly in (r, phi) coordinates.

Cross-validates the rescaled-field machinery by an independent route: the
classical geodesic equation with Christoffel symbols obtained by central
finite differences of the metric tensor, integrated by scipy's RK45.  The
direct equation degenerates at r = 0, so this instrument only operates on
r >= ~1e-4; the rescaled field is the only tool below that.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import PhasePoint, Trajectory
from .errors import DomainError
from .metric import CuspMetric

__all__ = [
    "DirectGeodesicState",
    "DirectCurve",
    "christoffel_fd",
    "integrate_geodesic_direct",
    "compare_trajectories",
    "phase_to_direct",
    "direct_to_phase",
    "unit_speed_error",
]

FD_STEP = 1e-6
R_MIN_DIRECT = 1e-4


@dataclass(frozen=True)
class DirectGeodesicState:
    """Position and arc-length velocity of a unit-speed geodesic."""

    r: float
    phi: float
    rdot: float
    phidot: float

    @property
    def array(self) -> np.ndarray:
        return np.array([self.r, self.phi, self.rdot, self.phidot])


def unit_speed_error(metric: CuspMetric, state: DirectGeodesicState) -> float:
    """|g(v, v) - 1| for the state's velocity."""
    g_rr, _, g_pp = metric.tensor(state.r, state.phi)
    return abs(g_rr * state.rdot**2 + g_pp * state.phidot**2 - 1.0)


def christoffel_fd(metric: CuspMetric, r: float, phi: float, h: float = FD_STEP) -> dict:
    """Christoffel symbols of the diagonal metric from central differences.

    Returns the six independent values keyed 'r_rr', 'r_rphi', 'r_phiphi',
    'phi_rr', 'phi_rphi', 'phi_phiphi'.
    """
    if r - h <= 0.0:
        raise DomainError(f"r={r} too close to the boundary for FD step {h}")
    if np.isfinite(metric.validity_radius) and r + 2 * h >= metric.validity_radius:
        raise DomainError(f"r={r} too close to the validity radius for FD step {h}")
    g_rr, _, g_pp = metric.tensor(r, phi)
    grr_rp, _, gpp_rp = metric.tensor(r + h, phi)
    grr_rm, _, gpp_rm = metric.tensor(r - h, phi)
    grr_pp, _, gpp_pp = metric.tensor(r, phi + h)
    grr_pm, _, gpp_pm = metric.tensor(r, phi - h)
    d_r_grr = (grr_rp - grr_rm) / (2 * h)
    d_p_grr = (grr_pp - grr_pm) / (2 * h)
    d_r_gpp = (gpp_rp - gpp_rm) / (2 * h)
    d_p_gpp = (gpp_pp - gpp_pm) / (2 * h)
    return {
        "r_rr": d_r_grr / (2 * g_rr),
        "r_rphi": d_p_grr / (2 * g_rr),
        "r_phiphi": -d_r_gpp / (2 * g_rr),
        "phi_rr": -d_p_grr / (2 * g_pp),
        "phi_rphi": d_r_gpp / (2 * g_pp),
        "phi_phiphi": d_p_gpp / (2 * g_pp),
    }


@dataclass(frozen=True)
class DirectCurve:
    """Solution of the direct geodesic equation with scipy dense output."""

    metric: CuspMetric
    tau: np.ndarray
    states: np.ndarray           # columns r, phi, rdot, phidot
    solution: object             # scipy OdeSolution
    truncated: bool

    def eval(self, tau):
        return np.asarray(self.solution(np.asarray(tau, dtype=float)))

    def unit_speed_drift(self) -> float:
        errs = [
            unit_speed_error(self.metric, DirectGeodesicState(*row))
            for row in self.states
        ]
        return float(np.max(errs))


def integrate_geodesic_direct(
    metric: CuspMetric,
    start: DirectGeodesicState,
    tau_span: tuple[float, float],
    tol: float = 1e-10,
    r_min: float = R_MIN_DIRECT,
) -> DirectCurve:
    """RK45 integration of the geodesic equation with FD Christoffels.

    Truncates if r falls below ``r_min`` (the direct equation is singular at
    r = 0).  The start must be unit speed to 1e-8.
    """
    if start.r < r_min:
        raise DomainError(f"start r={start.r} below the direct-integration floor {r_min}")
    err = unit_speed_error(metric, start)
    if err > 1e-8:
        raise ValueError(f"start is not unit speed: |g(v,v)-1| = {err:.3e}")

    def rhs(_tau, y):
        r, phi, rdot, phidot = y
        gam = christoffel_fd(metric, r, phi)
        return [
            rdot,
            phidot,
            -(gam["r_rr"] * rdot**2 + 2 * gam["r_rphi"] * rdot * phidot
              + gam["r_phiphi"] * phidot**2),
            -(gam["phi_rr"] * rdot**2 + 2 * gam["phi_rphi"] * rdot * phidot
              + gam["phi_phiphi"] * phidot**2),
        ]

    def hit_floor(_tau, y):
        return y[0] - r_min

    hit_floor.terminal = True
    hit_floor.direction = -1.0

    sol = solve_ivp(
        rhs,
        (float(tau_span[0]), float(tau_span[1])),
        start.array,
        method="RK45",
        rtol=tol,
        atol=tol,
        dense_output=True,
        events=hit_floor,
    )
    if not sol.success and sol.status != 1:
        raise RuntimeError(f"direct integration failed: {sol.message}")
    return DirectCurve(
        metric=metric,
        tau=sol.t,
        states=sol.y.T.copy(),
        solution=sol.sol,
        truncated=(sol.status == 1),
    )


def phase_to_direct(metric: CuspMetric, state) -> DirectGeodesicState:
    """Convert a rescaled shell state (r, phi, xi, theta) to direct velocities.

    dr/dtau = xi / g_rr and dphi/dtau = theta / (r C); exactly unit speed on
    the shell E = 1/2.
    """
    r, phi, xi, theta = (float(v) for v in np.asarray(state)[:4])
    p = 2 * metric.k - 2
    d = 1.0 - metric.kappa * r**p * metric.S(phi)
    return DirectGeodesicState(r, phi, xi / d, theta / (r * metric.C(phi)))


def direct_to_phase(metric: CuspMetric, state: DirectGeodesicState) -> PhasePoint:
    """Inverse of :func:`phase_to_direct`."""
    p = 2 * metric.k - 2
    d = 1.0 - metric.kappa * state.r**p * metric.S(state.phi)
    return PhasePoint(
        state.r,
        state.phi,
        d * state.rdot,
        state.r * metric.C(state.phi) * state.phidot,
    )


def compare_trajectories(traj: Trajectory, direct: DirectCurve, n: int = 200) -> float:
    """Max deviation in (r, phi * r_scale) over the overlapping arc-length range.

    phi differences are wrapped to the shortest representative and weighted by
    the mean r, so the angular deviation is measured at curve scale.
    """
    lo = max(float(traj.tau[0]), float(min(direct.tau[0], direct.tau[-1])))
    hi = min(float(traj.tau[-1]), float(max(direct.tau[0], direct.tau[-1])))
    if hi <= lo:
        raise ValueError("trajectories have no overlapping arc-length range")
    taus = np.linspace(lo, hi, n)
    length = traj.metric.length
    dev = 0.0
    rs = []
    rows = []
    for tq in taus:
        a = traj.state_at_tau(float(tq))
        b = direct.eval(float(tq))
        rs.append(0.5 * (a[0] + b[0]))
        rows.append((a[0] - b[0], a[1] - b[1]))
    r_scale = float(np.mean(rs))
    for dr, dphi in rows:
        dphi = (dphi + 0.5 * length) % length - 0.5 * length
        dev = max(dev, float(np.hypot(dr, r_scale * dphi)))
    return dev
