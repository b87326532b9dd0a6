"""Pure-Python fallback for the compiled Dormand-Prince cores.

Mirrors ``_rk45.pyx`` operation for operation (same tableau, same step
controller, same event handling) so that results agree with the extension to
rounding.  Used automatically when the extension is not built, or when
``CUSPGEO_BACKEND=python`` is set.
"""

from __future__ import annotations

from math import cos, fabs, isfinite, nan, pi, sin, sqrt

import numpy as np

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
H_MIN = 1e-14
SINGULAR_FIELD_NORM = 1e-13
SINGULAR_STREAK = 10

A21 = 1.0 / 5.0
A31 = 3.0 / 40.0
A32 = 9.0 / 40.0
A41 = 44.0 / 45.0
A42 = -56.0 / 15.0
A43 = 32.0 / 9.0
A51 = 19372.0 / 6561.0
A52 = -25360.0 / 2187.0
A53 = 64448.0 / 6561.0
A54 = -212.0 / 729.0
A61 = 9017.0 / 3168.0
A62 = -355.0 / 33.0
A63 = 46732.0 / 5247.0
A64 = 49.0 / 176.0
A65 = -5103.0 / 18656.0
B1 = 35.0 / 384.0
B3 = 500.0 / 1113.0
B4 = 125.0 / 192.0
B5 = -2187.0 / 6784.0
B6 = 11.0 / 84.0
E1 = 71.0 / 57600.0
E3 = -71.0 / 16695.0
E4 = 71.0 / 1920.0
E5 = -17253.0 / 339200.0
E6 = 22.0 / 525.0
E7 = -1.0 / 40.0


class _Sys:
    __slots__ = ("kind", "n", "p", "m", "kappa", "omega",
                 "s_cos", "s_sin", "c_cos", "c_sin")

    def __init__(self, kind, k, length, s_cos, s_sin, c_cos, c_sin):
        self.kind = kind
        self.n = 5 if kind == 0 else 2
        self.p = 2 * k - 2
        self.m = 2 * k - 1
        self.kappa = k * (k - 1.0)
        self.omega = 2.0 * pi / length
        self.s_cos = [float(v) for v in s_cos]
        self.s_sin = [float(v) for v in s_sin]
        self.c_cos = [float(v) for v in c_cos]
        self.c_sin = [float(v) for v in c_sin]


def _ipow(x, n):
    out = 1.0
    for _ in range(n):
        out *= x
    return out


def _fourier01(a, b, omega, phi):
    x = omega * phi
    c1 = cos(x)
    s1 = sin(x)
    cn, sn = 1.0, 0.0
    v0 = a[0]
    v1 = 0.0
    for n in range(1, len(a)):
        cn, sn = cn * c1 - sn * s1, sn * c1 + cn * s1
        w = n * omega
        v0 += a[n] * cn + b[n - 1] * sn
        v1 += w * (b[n - 1] * cn - a[n] * sn)
    return v0, v1


def _rhs(sys, y):
    if sys.kind == 0:
        r, phi, xi, th = y[0], y[1], y[2], y[3]
        s_val, s_phi = _fourier01(sys.s_cos, sys.s_sin, sys.omega, phi)
        c_val, c_phi = _fourier01(sys.c_cos, sys.c_sin, sys.omega, phi)
        inv_c = 1.0 / c_val
        rp = _ipow(r, sys.p)
        d = 1.0 - sys.kappa * rp * s_val
        if d < 1e-12:
            return [nan] * 5
        g = 0.5 * sys.kappa * s_val * xi * xi / d + 0.5 * inv_c * th * th
        g_xi = sys.kappa * s_val * xi / d
        g_th = inv_c * th
        g_r = (0.5 * sys.kappa * sys.kappa * sys.p * s_val * s_val * xi * xi
               * _ipow(r, sys.p - 1) / (d * d))
        g_phi = (0.5 * sys.kappa * s_phi * xi * xi / (d * d)
                 - 0.5 * th * th * c_phi * inv_c * inv_c)
        return [
            r * (xi + rp * g_xi),
            g_th,
            rp * (-sys.p * g - r * g_r + sys.m * th * g_th),
            -(g_phi + sys.m * xi * th + sys.m * rp * th * g_xi),
            r,
        ]
    phi, th = y[0], y[1]
    s_val, s_phi = _fourier01(sys.s_cos, sys.s_sin, sys.omega, phi)
    c_val, c_phi = _fourier01(sys.c_cos, sys.c_sin, sys.omega, phi)
    inv_c = 1.0 / c_val
    return [
        inv_c * th,
        -0.5 * sys.kappa * s_phi - sys.m * th + 0.5 * c_phi * inv_c * inv_c * th * th,
    ]


def _energy_of(sys, y):
    r, phi, xi, th = y[0], y[1], y[2], y[3]
    s_val, _ = _fourier01(sys.s_cos, sys.s_sin, sys.omega, phi)
    c_val, _ = _fourier01(sys.c_cos, sys.c_sin, sys.omega, phi)
    rp = _ipow(r, sys.p)
    d = 1.0 - sys.kappa * rp * s_val
    if d < 1e-12:
        return nan
    return 0.5 * xi * xi + rp * (0.5 * sys.kappa * s_val * xi * xi / d
                                 + 0.5 * th * th / c_val)


def _field_norm(sys, f):
    nf = 4 if sys.kind == 0 else sys.n
    acc = 0.0
    for i in range(nf):
        acc += f[i] * f[i]
    return sqrt(acc)


def _hermite(n, h, y0, f0, y1, f1, s):
    s2 = s * s
    s3 = s2 * s
    h00 = 2.0 * s3 - 3.0 * s2 + 1.0
    h10 = s3 - 2.0 * s2 + s
    h01 = -2.0 * s3 + 3.0 * s2
    h11 = s3 - s2
    return [h00 * y0[i] + h * h10 * f0[i] + h01 * y1[i] + h * h11 * f1[i]
            for i in range(n)]


def _bisect_component(n, h, y0, f0, y1, f1, comp, target):
    lo, hi = 0.0, 1.0
    glo = y0[comp] - target
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        tmp = _hermite(n, h, y0, f0, y1, f1, mid)
        if (tmp[comp] - target) * glo > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _error_norm(n, err, y0, y1, rtol, atol):
    acc = 0.0
    for i in range(n):
        m0 = max(fabs(y0[i]), fabs(y1[i]))
        sc = atol + rtol * m0
        acc += (err[i] / sc) * (err[i] / sc)
    return sqrt(acc / n)


def _drive(sys, t0, t1, rtol, atol, r_cap, tau_cap, r_floor, energy_budget,
           y_start, max_steps):
    n = sys.n
    ts = [t0]
    ys = [list(y_start)]
    y = list(y_start)
    k1 = _rhs(sys, y)
    fs = [list(k1)]
    e0 = _energy_of(sys, y) if sys.kind == 0 else 0.0

    direction = 1.0 if t1 >= t0 else -1.0
    span = fabs(t1 - t0)
    if span == 0.0:
        return ts, ys, fs, 0

    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + rtol * fabs(y[i])
        d0 += (y[i] / sc) * (y[i] / sc)
        d1 += (k1[i] / sc) * (k1[i] / sc)
    d0 = sqrt(d0 / n)
    d1 = sqrt(d1 / n)
    habs = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    if habs > span:
        habs = span
    yt = [y[i] + habs * direction * k1[i] for i in range(n)]
    k2 = _rhs(sys, yt)
    d2 = 0.0
    for i in range(n):
        sc = atol + rtol * fabs(y[i])
        d2 += ((k2[i] - k1[i]) / sc) * ((k2[i] - k1[i]) / sc)
    d2 = sqrt(d2 / n) / habs
    if d1 <= 1e-15 and d2 <= 1e-15:
        h = max(habs * 1e-3, 1e-6)
    else:
        h = (0.01 / max(d1, d2)) ** 0.2
    habs = min(h, 100.0 * habs)
    if habs > span:
        habs = span

    t = t0
    streak = 0
    nacc = 0

    def emit(reason):
        return ts, ys, fs, reason

    while True:
        if nacc >= max_steps:
            return emit(5)
        if habs < H_MIN:
            return emit(3)
        last_step = habs >= fabs(t1 - t)
        if last_step:
            habs = fabs(t1 - t)
        h = habs * direction

        yt = [y[i] + h * A21 * k1[i] for i in range(n)]
        k2 = _rhs(sys, yt)
        yt = [y[i] + h * (A31 * k1[i] + A32 * k2[i]) for i in range(n)]
        k3 = _rhs(sys, yt)
        yt = [y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]) for i in range(n)]
        k4 = _rhs(sys, yt)
        yt = [y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
              for i in range(n)]
        k5 = _rhs(sys, yt)
        yt = [y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i]
                          + A65 * k5[i]) for i in range(n)]
        k6 = _rhs(sys, yt)
        ynew = [y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i]
                            + B6 * k6[i]) for i in range(n)]
        k7 = _rhs(sys, ynew)
        err = [h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                    + E7 * k7[i]) for i in range(n)]

        bad = any(not isfinite(ynew[i]) or not isfinite(k7[i]) or not isfinite(err[i])
                  for i in range(n))
        if bad:
            habs *= 0.5
            continue
        norm = _error_norm(n, err, y, ynew, rtol, atol)
        if norm > 1.0:
            habs *= max(MIN_FACTOR, SAFETY * norm ** -0.2)
            continue

        nacc += 1
        t_prev = t
        t = t1 if last_step else t + h
        ts.append(t)
        ys.append(list(ynew))
        fs.append(list(k7))

        if sys.kind == 0:
            s_cap = 2.0
            s_floor = 2.0
            if ynew[0] > r_cap:
                s_cap = _bisect_component(n, h, y, k1, ynew, k7, 0, r_cap)
            if r_floor > 0.0 and ynew[0] < r_floor:
                s_floor = _bisect_component(n, h, y, k1, ynew, k7, 0, r_floor)
            if s_cap <= 1.0 or s_floor <= 1.0:
                s_cut = min(s_cap, s_floor)
                _truncate(sys, h, y, k1, ynew, k7, s_cut, t_prev, ts, ys, fs)
                return emit(1 if s_cap < s_floor else 7)
            if isfinite(tau_cap) and ynew[4] >= tau_cap:
                s_cut = _bisect_component(n, h, y, k1, ynew, k7, 4, tau_cap)
                _truncate(sys, h, y, k1, ynew, k7, s_cut, t_prev, ts, ys, fs)
                return emit(6)
            e_now = _energy_of(sys, ynew)
            if fabs(e_now - e0) > energy_budget:
                return emit(4)

        if _field_norm(sys, k7) < SINGULAR_FIELD_NORM:
            streak += 1
            if streak >= SINGULAR_STREAK:
                return emit(2)
        else:
            streak = 0

        if last_step:
            return emit(0)

        y = ynew
        k1 = k7
        factor = MAX_FACTOR if norm == 0.0 else SAFETY * norm ** -0.2
        habs *= min(MAX_FACTOR, max(MIN_FACTOR, factor))


def _truncate(sys, h, y0, f0, y1, f1, s, t_prev, ts, ys, fs):
    ycut = _hermite(sys.n, h, y0, f0, y1, f1, s)
    fcut = _rhs(sys, ycut)
    ts[-1] = t_prev + s * h
    ys[-1] = ycut
    fs[-1] = fcut


def _as_output(ts, ys, fs, reason):
    return np.asarray(ts), np.asarray(ys), np.asarray(fs), reason


def integrate_phase(k, length, s_cos, s_sin, c_cos, c_sin, y0, t0, t1, rtol, atol,
                    r_cap, tau_cap, r_floor, energy_budget, max_steps):
    """Integrate the rescaled field from ``y0 = (r, phi, xi, theta, tau)``."""
    sys = _Sys(0, int(k), float(length), s_cos, s_sin, c_cos, c_sin)
    out = _drive(sys, float(t0), float(t1), float(rtol), float(atol), float(r_cap),
                 float(tau_cap), float(r_floor), float(energy_budget),
                 [float(v) for v in y0], int(max_steps))
    return _as_output(*out)


def integrate_boundary(k, length, s_cos, s_sin, c_cos, c_sin, y0, t0, t1,
                       rtol, atol, max_steps):
    """Integrate the boundary system from ``y0 = (phi, theta)``."""
    sys = _Sys(1, int(k), float(length), s_cos, s_sin, c_cos, c_sin)
    out = _drive(sys, float(t0), float(t1), float(rtol), float(atol), 0.0, nan, 0.0,
                 0.0, [float(v) for v in y0], int(max_steps))
    return _as_output(*out)


def phase_rhs(k, length, s_cos, s_sin, c_cos, c_sin, y):
    """Field (r', phi', xi', theta') at a 4-component phase point."""
    sys = _Sys(0, int(k), float(length), s_cos, s_sin, c_cos, c_sin)
    yy = [float(y[0]), float(y[1]), float(y[2]), float(y[3]), 0.0]
    return np.asarray(_rhs(sys, yy)[:4])


def boundary_rhs(k, length, s_cos, s_sin, c_cos, c_sin, y):
    """Field (phi', theta') of the damped boundary system."""
    sys = _Sys(1, int(k), float(length), s_cos, s_sin, c_cos, c_sin)
    return np.asarray(_rhs(sys, [float(y[0]), float(y[1])]))


def phase_energy(k, length, s_cos, s_sin, c_cos, c_sin, y):
    """First integral of the rescaled field at a 4-component phase point."""
    sys = _Sys(0, int(k), float(length), s_cos, s_sin, c_cos, c_sin)
    yy = [float(y[0]), float(y[1]), float(y[2]), float(y[3]), 0.0]
    return _energy_of(sys, yy)
