"""Energy, rescaled geodesic field, boundary system, and their integration.

Phase space carries rescaled coordinates (r, phi, xi, theta) in which the
geodesic flow extends smoothly to the boundary r = 0: theta absorbs a factor
r^(2k-1) of the angular momentum.  The rescaled field V is r times the
geodesic Hamiltonian field; its time variable is t, while tau (arc length
along the underlying geodesic) satisfies d tau / d t = r and is co-integrated.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ._backend import core
from .errors import DomainError
from .metric import CuspMetric

__all__ = [
    "PhasePoint",
    "BoundaryState",
    "Trajectory",
    "shell_point",
    "energy",
    "boundary_energy",
    "rescaled_field",
    "boundary_field",
    "integrate",
    "SHELL_TOL",
]

SHELL_TOL = 1e-9
ENERGY_ABORT_BUDGET = 1e-6
MAX_STEPS = 32768

_REASONS = {
    0: ("time-limit", "reached the end of the time span"),
    1: ("left-domain", "r exceeded the integration domain radius"),
    2: ("converged-to-singular-point", "field norm below 1e-13 for 10 steps"),
    3: ("step-failure", "step size underflow"),
    4: ("step-failure", "first-integral drift exceeded abort budget"),
    5: ("step-failure", "step budget exhausted"),
    6: ("time-limit", "arc-length cap reached"),
    7: ("time-limit", "r fell below the requested floor"),
}


@dataclass(frozen=True)
class PhasePoint:
    """Point (r, phi, xi, theta) of the rescaled phase space; r = 0 is valid."""

    r: float
    phi: float
    xi: float
    theta: float

    def __post_init__(self) -> None:
        if self.r < 0:
            raise ValueError(f"r must be nonnegative, got {self.r}")

    @property
    def array(self) -> np.ndarray:
        return np.array([self.r, self.phi, self.xi, self.theta])


@dataclass(frozen=True)
class BoundaryState:
    """Point (phi, theta) of the boundary phase space T* dM."""

    phi: float
    theta: float

    @property
    def array(self) -> np.ndarray:
        return np.array([self.phi, self.theta])


def shell_point(
    metric: CuspMetric, r: float, phi: float, theta: float, xi_sign: int = +1
) -> PhasePoint:
    """Phase point on the unit-speed shell E = 1/2, with xi solved exactly.

    On the model metric the shell condition gives
    ``xi^2 = D (1 - r^(2k-2) theta^2 / C)`` with ``D = 1 - k(k-1) r^(2k-2) S``.
    """
    p = 2 * metric.k - 2
    s_val = metric.S(phi)
    c_val = metric.C(phi)
    rp = float(r) ** p
    d = 1.0 - metric.kappa * rp * s_val
    if d <= 0.0:
        raise DomainError(f"r={r} outside the validity radius")
    radicand = d * (1.0 - rp * theta * theta / c_val)
    if radicand < 0.0:
        raise ValueError(
            f"no shell point with r={r}, theta={theta}: angular energy exceeds 1/2"
        )
    return PhasePoint(float(r), float(phi), float(xi_sign) * float(np.sqrt(radicand)),
                      float(theta))


def energy(metric: CuspMetric, point: PhasePoint) -> float:
    """First integral E = xi^2/2 + r^(2k-2) G of the rescaled field.

    Closed form of G on the model metric:
    ``G = k(k-1) S xi^2 / (2 D) + theta^2 / (2 C)``.
    """
    p = 2 * metric.k - 2
    s_val = metric.S(point.phi)
    c_val = metric.C(point.phi)
    rp = point.r**p
    d = 1.0 - metric.kappa * rp * s_val
    if d <= 0.0:
        raise DomainError(f"r={point.r} outside the validity radius")
    g = 0.5 * metric.kappa * s_val * point.xi**2 / d + 0.5 * point.theta**2 / c_val
    return 0.5 * point.xi**2 + rp * g


def boundary_energy(metric: CuspMetric, state: BoundaryState) -> float:
    """Damped-Hamiltonian energy k(k-1) S / 2 + theta^2 / (2C) on the boundary."""
    return float(
        0.5 * metric.kappa * metric.S(state.phi)
        + 0.5 * state.theta**2 / metric.C(state.phi)
    )


def rescaled_field(metric: CuspMetric, point: PhasePoint) -> np.ndarray:
    """Tangent vector (r', phi', xi', theta') of the rescaled field V."""
    k, length, _, s_cos, s_sin, c_cos, c_sin = metric.packed
    if point.r > metric.validity_radius:
        raise DomainError(f"r={point.r} outside the validity radius")
    return core.phase_rhs(k, length, s_cos, s_sin, c_cos, c_sin, point.array)


def boundary_field(metric: CuspMetric, state: BoundaryState) -> np.ndarray:
    """Tangent vector (phi', theta') of the boundary system."""
    k, length, _, s_cos, s_sin, c_cos, c_sin = metric.packed
    return core.boundary_rhs(k, length, s_cos, s_sin, c_cos, c_sin, state.array)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


def _hermite_eval(h, y0, f0, y1, f1, s):
    s2 = s * s
    s3 = s2 * s
    h00 = 2.0 * s3 - 3.0 * s2 + 1.0
    h10 = s3 - 2.0 * s2 + s
    h01 = -2.0 * s3 + 3.0 * s2
    h11 = s3 - s2
    return h00 * y0 + h * h10 * f0 + h01 * y1 + h * h11 * f1


@dataclass(frozen=True)
class Trajectory:
    """Time-sampled integral curve with cubic-Hermite dense output.

    ``states`` has columns (r, phi, xi, theta) for phase trajectories and
    (phi, theta) for boundary trajectories; ``t`` is strictly increasing in
    both cases (backward integrations are stored reversed, with ``direction``
    recording the original orientation).
    """

    metric: CuspMetric
    kind: str                    # "phase" | "boundary"
    t: np.ndarray
    states: np.ndarray
    tau: np.ndarray
    derivs: np.ndarray
    stop_reason: str
    stop_detail: str
    direction: str = "forward"
    start_label: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return self.t.size

    # -- column access ------------------------------------------------------

    @property
    def r(self) -> np.ndarray:
        if self.kind == "phase":
            return self.states[:, 0]
        return np.zeros(len(self))

    @property
    def phi(self) -> np.ndarray:
        return self.states[:, 1 if self.kind == "phase" else 0]

    @property
    def xi(self) -> np.ndarray:
        if self.kind == "phase":
            return self.states[:, 2]
        return np.ones(len(self))

    @property
    def theta(self) -> np.ndarray:
        return self.states[:, 3 if self.kind == "phase" else 1]

    def point(self, i: int) -> PhasePoint:
        if self.kind == "phase":
            r, phi, xi, theta = self.states[i]
            return PhasePoint(r, phi, xi, theta)
        phi, theta = self.states[i]
        return PhasePoint(0.0, phi, 1.0, theta)

    def samples(self) -> Iterable[tuple]:
        for i in range(len(self)):
            yield self.t[i], self.point(i), self.tau[i]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def integration_endpoint(self) -> np.ndarray:
        """State where the integration stopped (first row for backward runs)."""
        return self.states[0] if self.direction == "backward" else self.states[-1]

    # -- dense output ---------------------------------------------------------

    def state_at(self, t_query: float) -> np.ndarray:
        t = float(t_query)
        if not (self.t[0] <= t <= self.t[-1]):
            raise ValueError(f"t={t} outside trajectory range [{self.t[0]}, {self.t[-1]}]")
        i = int(np.searchsorted(self.t, t, side="right") - 1)
        i = min(max(i, 0), len(self) - 2) if len(self) > 1 else 0
        if len(self) == 1:
            return self.states[0].copy()
        h = self.t[i + 1] - self.t[i]
        s = 0.0 if h == 0.0 else (t - self.t[i]) / h
        return _hermite_eval(h, self.states[i], self.derivs[i, : self.states.shape[1]],
                             self.states[i + 1],
                             self.derivs[i + 1, : self.states.shape[1]], s)

    def tau_at(self, t_query: float) -> float:
        if self.kind != "phase":
            return 0.0
        t = float(t_query)
        i = int(np.searchsorted(self.t, t, side="right") - 1)
        i = min(max(i, 0), len(self) - 2)
        h = self.t[i + 1] - self.t[i]
        s = 0.0 if h == 0.0 else (t - self.t[i]) / h
        # d tau/dt = r, so the Hermite pair is (tau, r)
        return float(
            _hermite_eval(h, self.tau[i], self.states[i, 0], self.tau[i + 1],
                          self.states[i + 1, 0], s)
        )

    def t_of_tau(self, tau_query: float) -> float:
        """Invert the nondecreasing arc-length clock (phase trajectories)."""
        if self.kind != "phase":
            raise ValueError("tau parametrization applies to phase trajectories")
        tq = float(tau_query)
        if not (self.tau[0] <= tq <= self.tau[-1]):
            raise ValueError(
                f"tau={tq} outside trajectory range [{self.tau[0]}, {self.tau[-1]}]"
            )
        i = int(np.searchsorted(self.tau, tq, side="right") - 1)
        i = min(max(i, 0), len(self) - 2)
        lo, hi = self.t[i], self.t[i + 1]
        h = hi - lo
        if h == 0.0:
            return float(lo)
        a, b = 0.0, 1.0
        for _ in range(80):
            mid = 0.5 * (a + b)
            val = _hermite_eval(h, self.tau[i], self.states[i, 0], self.tau[i + 1],
                                self.states[i + 1, 0], mid)
            if val < tq:
                a = mid
            else:
                b = mid
        return float(lo + 0.5 * (a + b) * h)

    def state_at_tau(self, tau_query: float) -> np.ndarray:
        return self.state_at(self.t_of_tau(tau_query))

    def crossings_r(self, level: float) -> list[tuple[float, np.ndarray]]:
        """All (t, state) where r crosses ``level``, by dense-output bisection."""
        if self.kind != "phase":
            return []
        out = []
        rr = self.states[:, 0]
        for i in range(len(self) - 1):
            lo, hi = rr[i] - level, rr[i + 1] - level
            if lo == 0.0:
                out.append((float(self.t[i]), self.states[i].copy()))
            elif lo * hi < 0.0:
                h = self.t[i + 1] - self.t[i]
                a, b = 0.0, 1.0
                for _ in range(80):
                    mid = 0.5 * (a + b)
                    val = _hermite_eval(h, rr[i], self.derivs[i, 0], rr[i + 1],
                                        self.derivs[i + 1, 0], mid)
                    if (val - level) * lo > 0.0:
                        a = mid
                    else:
                        b = mid
                s = 0.5 * (a + b)
                state = _hermite_eval(h, self.states[i], self.derivs[i, :4],
                                      self.states[i + 1], self.derivs[i + 1, :4], s)
                out.append((float(self.t[i] + s * h), state))
        if rr[-1] == level:
            out.append((float(self.t[-1]), self.states[-1].copy()))
        return out

    # -- derived quantities ---------------------------------------------------

    def energies(self) -> np.ndarray:
        if self.kind == "phase":
            return np.array([energy(self.metric, self.point(i)) for i in range(len(self))])
        return np.full(len(self), 0.5)

    def boundary_energies(self) -> np.ndarray:
        return np.array(
            [
                boundary_energy(self.metric, BoundaryState(self.phi[i], self.theta[i]))
                for i in range(len(self))
            ]
        )

    # -- export ---------------------------------------------------------------

    def to_csv(self, path) -> None:
        """Write t, tau, r, phi, xi, theta, energy rows (full precision)."""
        cols = ["t", "tau", "r", "phi", "xi", "theta", "energy"]
        if self.kind == "boundary":
            cols.append("e_boundary")
            eb = self.boundary_energies()
        en = self.energies()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for i in range(len(self)):
                row = [
                    repr(float(self.t[i])),
                    repr(float(self.tau[i])),
                    repr(float(self.r[i])),
                    repr(float(self.phi[i])),
                    repr(float(self.xi[i])),
                    repr(float(self.theta[i])),
                    repr(float(en[i])),
                ]
                if self.kind == "boundary":
                    row.append(repr(float(eb[i])))
                writer.writerow(row)


def from_csv(path, metric: CuspMetric) -> Trajectory:
    """Re-read a trajectory CSV written by :meth:`Trajectory.to_csv`.

    Dense output is rebuilt from the recorded samples by re-evaluating the
    field, so interpolation between samples is reproduced exactly.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array([[float(v) for v in row] for row in rows[1:]])
    kind = "boundary" if "e_boundary" in header else "phase"
    t = data[:, 0]
    tau = data[:, 1]
    if kind == "phase":
        states = data[:, 2:6]
        derivs = np.array(
            [
                np.concatenate(
                    [
                        rescaled_field(metric, PhasePoint(*row)),
                        [row[0]],
                    ]
                )
                for row in states
            ]
        )
    else:
        states = data[:, [3, 5]]
        derivs = np.array(
            [boundary_field(metric, BoundaryState(*row)) for row in states]
        )
    return Trajectory(metric, kind, t, states, tau, derivs,
                      stop_reason="time-limit", stop_detail="loaded from csv")


def integrate(
    metric: CuspMetric,
    start: PhasePoint | BoundaryState,
    t_span: tuple[float, float],
    tol: float = 1e-10,
    *,
    tau_limit: float | None = None,
    r_floor: float | None = None,
    max_steps: int = MAX_STEPS,
    start_label: str = "",
) -> Trajectory:
    """Adaptive 5(4) integration of the appropriate field.

    Phase trajectories co-integrate arc length (d tau/dt = r), stop early when
    r leaves the domain ``r <= metric.r_max`` or the field converges to a
    singular point, and abort with ``step-failure`` if the conserved energy
    drifts by more than 1e-6.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    t0, t1 = float(t_span[0]), float(t_span[1])
    k, length, r_cap, s_cos, s_sin, c_cos, c_sin = metric.packed

    if isinstance(start, PhasePoint):
        if start.r > metric.r_max:
            raise DomainError(
                f"start r={start.r} beyond the integration domain r_max={metric.r_max}"
            )
        y0 = np.array([start.r, start.phi, start.xi, start.theta, 0.0])
        ts, ys, fs, reason = core.integrate_phase(
            k, length, s_cos, s_sin, c_cos, c_sin, y0, t0, t1, tol, tol,
            r_cap, np.nan if tau_limit is None else float(tau_limit),
            0.0 if r_floor is None else float(r_floor),
            ENERGY_ABORT_BUDGET, max_steps,
        )
        states = ys[:, :4].copy()
        tau = ys[:, 4].copy()
        derivs = fs.copy()
        kind = "phase"
    elif isinstance(start, BoundaryState):
        y0 = np.array([start.phi, start.theta])
        ts, ys, fs, reason = core.integrate_boundary(
            k, length, s_cos, s_sin, c_cos, c_sin, y0, t0, t1, tol, tol, max_steps
        )
        states = ys.copy()
        tau = np.zeros(ts.size)
        derivs = fs.copy()
        kind = "boundary"
    else:
        raise TypeError(f"start must be PhasePoint or BoundaryState, got {type(start)}")

    direction = "backward" if t1 < t0 else "forward"
    t_arr = ts.copy()
    if direction == "backward":
        t_arr = t_arr[::-1].copy()
        states = states[::-1].copy()
        tau = tau[::-1].copy()
        derivs = derivs[::-1].copy()
    if kind == "phase":
        tau = tau - tau[0]

    stop_reason, stop_detail = _REASONS[reason]
    return Trajectory(
        metric=metric,
        kind=kind,
        t=t_arr,
        states=states,
        tau=tau,
        derivs=derivs,
        stop_reason=stop_reason,
        stop_detail=stop_detail,
        direction=direction,
        start_label=start_label,
    )
