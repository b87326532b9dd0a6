# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Dormand-Prince 5(4) cores for the rescaled and boundary systems.

The pure-Python twin of this module is ``_rk45_py``; both expose the same
functions and must stay in step (the test suite compares them).  Reason codes
returned by the integrators:

    0  reached the end of the requested time span
    1  left the integration domain (r exceeded the domain radius)
    2  converged to a singular point of the field
    3  step size underflow
    4  first-integral drift exceeded the abort budget
    5  step budget exhausted
    6  arc-length cap reached
    7  r fell below the requested floor
"""

import numpy as np

from libc.math cimport sqrt, sin, cos, fabs, pow, isfinite, NAN, M_PI

cdef enum:
    NDIM_MAX = 6

cdef double SAFETY = 0.9
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 10.0
cdef double H_MIN = 1e-14
cdef double SINGULAR_FIELD_NORM = 1e-13
cdef int SINGULAR_STREAK = 10

# Dormand-Prince tableau
cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0
cdef double A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0
cdef double A42 = -56.0 / 15.0
cdef double A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0
cdef double A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0
cdef double A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0
cdef double A62 = -355.0 / 33.0
cdef double A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0
cdef double A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0
cdef double B3 = 500.0 / 1113.0
cdef double B4 = 125.0 / 192.0
cdef double B5 = -2187.0 / 6784.0
cdef double B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0
cdef double E3 = -71.0 / 16695.0
cdef double E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0
cdef double E6 = 22.0 / 525.0
cdef double E7 = -1.0 / 40.0


cdef struct Sys:
    int kind        # 0: rescaled phase system (5 states), 1: boundary system (2)
    int n           # state dimension
    int p           # 2k - 2
    int m           # 2k - 1
    double kappa    # k (k - 1)
    double omega    # 2 pi / L


cdef inline double ipow(double x, int n) noexcept nogil:
    cdef double out = 1.0
    cdef int i
    for i in range(n):
        out *= x
    return out


cdef inline void fourier01(const double[::1] a, const double[::1] b, double omega,
                           double phi, double* f0, double* f1) noexcept nogil:
    """Value and first derivative of a finite Fourier series via recurrence."""
    cdef int nn = <int>a.shape[0] - 1
    cdef double x = omega * phi
    cdef double c1 = cos(x)
    cdef double s1 = sin(x)
    cdef double cn = 1.0, sn = 0.0, ctmp, w
    cdef double v0 = a[0], v1 = 0.0
    cdef int n
    for n in range(1, nn + 1):
        ctmp = cn * c1 - sn * s1
        sn = sn * c1 + cn * s1
        cn = ctmp
        w = n * omega
        v0 += a[n] * cn + b[n - 1] * sn
        v1 += w * (b[n - 1] * cn - a[n] * sn)
    f0[0] = v0
    f1[0] = v1


cdef inline void rhs(Sys sys, const double[::1] s_cos, const double[::1] s_sin,
                     const double[::1] c_cos, const double[::1] c_sin,
                     const double* y, double* f) noexcept nogil:
    cdef double s_val, s_phi, c_val, c_phi, inv_c
    cdef double r, phi, xi, th, rp, d, g, g_xi, g_r, g_th, g_phi
    if sys.kind == 0:
        r = y[0]; phi = y[1]; xi = y[2]; th = y[3]
        fourier01(s_cos, s_sin, sys.omega, phi, &s_val, &s_phi)
        fourier01(c_cos, c_sin, sys.omega, phi, &c_val, &c_phi)
        inv_c = 1.0 / c_val
        rp = ipow(r, sys.p)
        d = 1.0 - sys.kappa * rp * s_val
        if d < 1e-12:
            f[0] = NAN; f[1] = NAN; f[2] = NAN; f[3] = NAN; f[4] = NAN
            return
        g = 0.5 * sys.kappa * s_val * xi * xi / d + 0.5 * inv_c * th * th
        g_xi = sys.kappa * s_val * xi / d
        g_th = inv_c * th
        g_r = 0.5 * sys.kappa * sys.kappa * sys.p * s_val * s_val * xi * xi \
            * ipow(r, sys.p - 1) / (d * d)
        g_phi = 0.5 * sys.kappa * s_phi * xi * xi / (d * d) \
            - 0.5 * th * th * c_phi * inv_c * inv_c
        f[0] = r * (xi + rp * g_xi)
        f[1] = g_th
        f[2] = rp * (-sys.p * g - r * g_r + sys.m * th * g_th)
        f[3] = -(g_phi + sys.m * xi * th + sys.m * rp * th * g_xi)
        f[4] = r
    else:
        phi = y[0]; th = y[1]
        fourier01(s_cos, s_sin, sys.omega, phi, &s_val, &s_phi)
        fourier01(c_cos, c_sin, sys.omega, phi, &c_val, &c_phi)
        inv_c = 1.0 / c_val
        f[0] = inv_c * th
        f[1] = -0.5 * sys.kappa * s_phi - sys.m * th \
            + 0.5 * c_phi * inv_c * inv_c * th * th


cdef inline double energy_of(Sys sys, const double[::1] s_cos, const double[::1] s_sin,
                             const double[::1] c_cos, const double[::1] c_sin,
                             const double* y) noexcept nogil:
    cdef double s_val, s_phi, c_val, c_phi
    cdef double r = y[0], phi = y[1], xi = y[2], th = y[3]
    cdef double rp, d
    fourier01(s_cos, s_sin, sys.omega, phi, &s_val, &s_phi)
    fourier01(c_cos, c_sin, sys.omega, phi, &c_val, &c_phi)
    rp = ipow(r, sys.p)
    d = 1.0 - sys.kappa * rp * s_val
    if d < 1e-12:
        return NAN
    return 0.5 * xi * xi + rp * (0.5 * sys.kappa * s_val * xi * xi / d
                                 + 0.5 * th * th / c_val)


cdef inline double field_norm(Sys sys, const double* f) noexcept nogil:
    """Norm of the vector field proper (the arc-length clock is excluded)."""
    cdef double acc = 0.0
    cdef int i
    cdef int nf = 4 if sys.kind == 0 else sys.n
    for i in range(nf):
        acc += f[i] * f[i]
    return sqrt(acc)


cdef inline void hermite(int n, double h, const double* y0, const double* f0,
                         const double* y1, const double* f1, double s,
                         double* out) noexcept nogil:
    cdef double s2 = s * s
    cdef double s3 = s2 * s
    cdef double h00 = 2.0 * s3 - 3.0 * s2 + 1.0
    cdef double h10 = s3 - 2.0 * s2 + s
    cdef double h01 = -2.0 * s3 + 3.0 * s2
    cdef double h11 = s3 - s2
    cdef int i
    for i in range(n):
        out[i] = h00 * y0[i] + h * h10 * f0[i] + h01 * y1[i] + h * h11 * f1[i]


cdef double bisect_component(int n, double h, const double* y0, const double* f0,
                             const double* y1, const double* f1,
                             int comp, double target) noexcept nogil:
    """Parameter s in [0, 1] where the Hermite interpolant's component hits target."""
    cdef double lo = 0.0, hi = 1.0, mid
    cdef double tmp[NDIM_MAX]
    cdef double glo = y0[comp] - target
    cdef int it
    for it in range(80):
        mid = 0.5 * (lo + hi)
        hermite(n, h, y0, f0, y1, f1, mid, tmp)
        if (tmp[comp] - target) * glo > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


cdef inline double error_norm(int n, const double* err, const double* y0,
                              const double* y1, double rtol, double atol) noexcept nogil:
    cdef double acc = 0.0, sc, m0
    cdef int i
    for i in range(n):
        m0 = fabs(y0[i])
        if fabs(y1[i]) > m0:
            m0 = fabs(y1[i])
        sc = atol + rtol * m0
        acc += (err[i] / sc) * (err[i] / sc)
    return sqrt(acc / n)


cdef void truncate_at(Sys sys, const double[::1] s_cos, const double[::1] s_sin,
                      const double[::1] c_cos, const double[::1] c_sin,
                      double h, const double* y0, const double* f0,
                      const double* y1, const double* f1, double s, double t_prev,
                      double[::1] ts, double[:, ::1] ys, double[:, ::1] fs,
                      int row) noexcept nogil:
    """Replace sample ``row`` with the interpolated state at fraction ``s``."""
    cdef double ycut[NDIM_MAX]
    cdef double fcut[NDIM_MAX]
    cdef int i
    hermite(sys.n, h, y0, f0, y1, f1, s, ycut)
    rhs(sys, s_cos, s_sin, c_cos, c_sin, ycut, fcut)
    ts[row] = t_prev + s * h
    for i in range(sys.n):
        ys[row, i] = ycut[i]
        fs[row, i] = fcut[i]


cdef int drive(Sys sys, const double[::1] s_cos, const double[::1] s_sin,
               const double[::1] c_cos, const double[::1] c_sin,
               double t0, double t1, double rtol, double atol,
               double r_cap, double tau_cap, double r_floor, double energy_budget,
               double[::1] ts, double[:, ::1] ys, double[:, ::1] fs,
               int* count) noexcept nogil:
    cdef int n = sys.n
    cdef double y[NDIM_MAX]
    cdef double ynew[NDIM_MAX]
    cdef double yt[NDIM_MAX]
    cdef double k1[NDIM_MAX]
    cdef double k2[NDIM_MAX]
    cdef double k3[NDIM_MAX]
    cdef double k4[NDIM_MAX]
    cdef double k5[NDIM_MAX]
    cdef double k6[NDIM_MAX]
    cdef double k7[NDIM_MAX]
    cdef double err[NDIM_MAX]
    cdef double t = t0, t_prev, h, habs, direction, span, d0, d1, d2, sc, norm, factor
    cdef double e0 = 0.0, e_now, s_cap, s_floor, s_cut, fnrm
    cdef int i, nacc = 0, streak = 0, max_steps = <int>ts.shape[0] - 1
    cdef bint bad, last_step

    direction = 1.0 if t1 >= t0 else -1.0
    span = fabs(t1 - t0)

    for i in range(n):
        y[i] = ys[0, i]
    rhs(sys, s_cos, s_sin, c_cos, c_sin, y, k1)
    for i in range(n):
        fs[0, i] = k1[i]
    ts[0] = t0
    if sys.kind == 0:
        e0 = energy_of(sys, s_cos, s_sin, c_cos, c_sin, y)
    if span == 0.0:
        count[0] = 1
        return 0

    # initial step size (same heuristic as scipy's RK45)
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + rtol * fabs(y[i])
        d0 += (y[i] / sc) * (y[i] / sc)
        d1 += (k1[i] / sc) * (k1[i] / sc)
    d0 = sqrt(d0 / n)
    d1 = sqrt(d1 / n)
    if d0 < 1e-5 or d1 < 1e-5:
        habs = 1e-6
    else:
        habs = 0.01 * d0 / d1
    if habs > span:
        habs = span
    for i in range(n):
        yt[i] = y[i] + habs * direction * k1[i]
    rhs(sys, s_cos, s_sin, c_cos, c_sin, yt, k2)
    d2 = 0.0
    for i in range(n):
        sc = atol + rtol * fabs(y[i])
        d2 += ((k2[i] - k1[i]) / sc) * ((k2[i] - k1[i]) / sc)
    d2 = sqrt(d2 / n) / habs
    if d1 <= 1e-15 and d2 <= 1e-15:
        h = habs * 1e-3 if habs * 1e-3 > 1e-6 else 1e-6
    else:
        h = pow(0.01 / (d1 if d1 > d2 else d2), 0.2)
    habs = h if h < 100.0 * habs else 100.0 * habs
    if habs > span:
        habs = span

    while True:
        if nacc >= max_steps:
            count[0] = nacc + 1
            return 5
        if habs < H_MIN:
            count[0] = nacc + 1
            return 3
        last_step = habs >= fabs(t1 - t)
        if last_step:
            habs = fabs(t1 - t)
        h = habs * direction

        # six fresh stages + FSAL stage
        for i in range(n):
            yt[i] = y[i] + h * A21 * k1[i]
        rhs(sys, s_cos, s_sin, c_cos, c_sin, yt, k2)
        for i in range(n):
            yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
        rhs(sys, s_cos, s_sin, c_cos, c_sin, yt, k3)
        for i in range(n):
            yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        rhs(sys, s_cos, s_sin, c_cos, c_sin, yt, k4)
        for i in range(n):
            yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        rhs(sys, s_cos, s_sin, c_cos, c_sin, yt, k5)
        for i in range(n):
            yt[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                + A64 * k4[i] + A65 * k5[i])
        rhs(sys, s_cos, s_sin, c_cos, c_sin, yt, k6)
        for i in range(n):
            ynew[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i]
                                  + B5 * k5[i] + B6 * k6[i])
        rhs(sys, s_cos, s_sin, c_cos, c_sin, ynew, k7)
        for i in range(n):
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                          + E6 * k6[i] + E7 * k7[i])

        bad = False
        for i in range(n):
            if not isfinite(ynew[i]) or not isfinite(k7[i]) or not isfinite(err[i]):
                bad = True
        if bad:
            habs *= 0.5
            continue
        norm = error_norm(n, err, y, ynew, rtol, atol)
        if norm > 1.0:
            factor = SAFETY * pow(norm, -0.2)
            if factor < MIN_FACTOR:
                factor = MIN_FACTOR
            habs *= factor
            continue

        # accepted
        nacc += 1
        t_prev = t
        t = t1 if last_step else t + h
        ts[nacc] = t
        for i in range(n):
            ys[nacc, i] = ynew[i]
            fs[nacc, i] = k7[i]

        if sys.kind == 0:
            # events: whichever of domain exit / r floor happens first in the step
            s_cap = 2.0
            s_floor = 2.0
            if ynew[0] > r_cap:
                s_cap = bisect_component(n, h, y, k1, ynew, k7, 0, r_cap)
            if r_floor > 0.0 and ynew[0] < r_floor:
                s_floor = bisect_component(n, h, y, k1, ynew, k7, 0, r_floor)
            if s_cap <= 1.0 or s_floor <= 1.0:
                s_cut = s_cap if s_cap < s_floor else s_floor
                truncate_at(sys, s_cos, s_sin, c_cos, c_sin, h, y, k1, ynew, k7,
                            s_cut, t_prev, ts, ys, fs, nacc)
                count[0] = nacc + 1
                return 1 if s_cap < s_floor else 7
            if isfinite(tau_cap) and ynew[4] >= tau_cap:
                s_cut = bisect_component(n, h, y, k1, ynew, k7, 4, tau_cap)
                truncate_at(sys, s_cos, s_sin, c_cos, c_sin, h, y, k1, ynew, k7,
                            s_cut, t_prev, ts, ys, fs, nacc)
                count[0] = nacc + 1
                return 6
            e_now = energy_of(sys, s_cos, s_sin, c_cos, c_sin, ynew)
            if fabs(e_now - e0) > energy_budget:
                count[0] = nacc + 1
                return 4

        fnrm = field_norm(sys, k7)
        if fnrm < SINGULAR_FIELD_NORM:
            streak += 1
            if streak >= SINGULAR_STREAK:
                count[0] = nacc + 1
                return 2
        else:
            streak = 0

        if last_step:
            count[0] = nacc + 1
            return 0

        for i in range(n):
            y[i] = ynew[i]
            k1[i] = k7[i]
        factor = MAX_FACTOR if norm == 0.0 else SAFETY * pow(norm, -0.2)
        if factor > MAX_FACTOR:
            factor = MAX_FACTOR
        if factor < MIN_FACTOR:
            factor = MIN_FACTOR
        habs *= factor


cdef Sys make_sys(int kind, int k, double length) noexcept nogil:
    cdef Sys sys
    sys.kind = kind
    sys.n = 5 if kind == 0 else 2
    sys.p = 2 * k - 2
    sys.m = 2 * k - 1
    sys.kappa = k * (k - 1.0)
    sys.omega = 2.0 * M_PI / length
    return sys


def integrate_phase(int k, double length, double[::1] s_cos, double[::1] s_sin,
                    double[::1] c_cos, double[::1] c_sin, double[::1] y0,
                    double t0, double t1, double rtol, double atol,
                    double r_cap, double tau_cap, double r_floor,
                    double energy_budget, int max_steps):
    """Integrate the rescaled field from ``y0 = (r, phi, xi, theta, tau)``.

    Returns ``(ts, ys, fs, reason_code)``.
    """
    cdef Sys sys = make_sys(0, k, length)
    ts = np.empty(max_steps + 1)
    ys = np.empty((max_steps + 1, 5))
    fs = np.empty((max_steps + 1, 5))
    cdef double[::1] ts_v = ts
    cdef double[:, ::1] ys_v = ys
    cdef double[:, ::1] fs_v = fs
    cdef int i, reason
    cdef int count = 0
    for i in range(5):
        ys_v[0, i] = y0[i]
    with nogil:
        reason = drive(sys, s_cos, s_sin, c_cos, c_sin, t0, t1, rtol, atol,
                       r_cap, tau_cap, r_floor, energy_budget, ts_v, ys_v, fs_v,
                       &count)
    return ts[:count], ys[:count], fs[:count], reason


def integrate_boundary(int k, double length, double[::1] s_cos, double[::1] s_sin,
                       double[::1] c_cos, double[::1] c_sin, double[::1] y0,
                       double t0, double t1, double rtol, double atol,
                       int max_steps):
    """Integrate the boundary system from ``y0 = (phi, theta)``."""
    cdef Sys sys = make_sys(1, k, length)
    ts = np.empty(max_steps + 1)
    ys = np.empty((max_steps + 1, 2))
    fs = np.empty((max_steps + 1, 2))
    cdef double[::1] ts_v = ts
    cdef double[:, ::1] ys_v = ys
    cdef double[:, ::1] fs_v = fs
    cdef int i, reason
    cdef int count = 0
    for i in range(2):
        ys_v[0, i] = y0[i]
    with nogil:
        reason = drive(sys, s_cos, s_sin, c_cos, c_sin, t0, t1, rtol, atol,
                       0.0, NAN, 0.0, 0.0, ts_v, ys_v, fs_v, &count)
    return ts[:count], ys[:count], fs[:count], reason


def phase_rhs(int k, double length, double[::1] s_cos, double[::1] s_sin,
              double[::1] c_cos, double[::1] c_sin, double[::1] y):
    """Field (r', phi', xi', theta') at a 4-component phase point."""
    cdef Sys sys = make_sys(0, k, length)
    cdef double yy[NDIM_MAX]
    cdef double ff[NDIM_MAX]
    cdef int i
    for i in range(4):
        yy[i] = y[i]
    yy[4] = 0.0
    rhs(sys, s_cos, s_sin, c_cos, c_sin, yy, ff)
    out = np.empty(4)
    for i in range(4):
        out[i] = ff[i]
    return out


def boundary_rhs(int k, double length, double[::1] s_cos, double[::1] s_sin,
                 double[::1] c_cos, double[::1] c_sin, double[::1] y):
    """Field (phi', theta') of the damped boundary system."""
    cdef Sys sys = make_sys(1, k, length)
    cdef double yy[NDIM_MAX]
    cdef double ff[NDIM_MAX]
    yy[0] = y[0]
    yy[1] = y[1]
    rhs(sys, s_cos, s_sin, c_cos, c_sin, yy, ff)
    out = np.empty(2)
    out[0] = ff[0]
    out[1] = ff[1]
    return out


def phase_energy(int k, double length, double[::1] s_cos, double[::1] s_sin,
                 double[::1] c_cos, double[::1] c_sin, double[::1] y):
    """First integral of the rescaled field at a 4-component phase point."""
    cdef Sys sys = make_sys(0, k, length)
    cdef double yy[NDIM_MAX]
    cdef int i
    for i in range(4):
        yy[i] = y[i]
    yy[4] = 0.0
    return energy_of(sys, s_cos, s_sin, c_cos, c_sin, yy)
