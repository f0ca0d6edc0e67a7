# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: vector-field right-hand sides and Melnikov integrands.

Mirrors pcrtbp._purepy; selected by pcrtbp.backend when built.
"""

from libc.math cimport sqrt, sin, cos, cbrt, exp

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double KAPPA = 3.0 ** (2.0 / 3.0) / 2.0 ** (1.0 / 3.0)
cdef double KAPPA2 = KAPPA * KAPPA


def rhs_cartesian(double t, y, double mu):
    cdef double q1 = y[0], q2 = y[1], p1 = y[2], p2 = y[3]
    cdef double d1 = sqrt((q1 + mu) * (q1 + mu) + q2 * q2)
    cdef double a1 = (1.0 - mu) / (d1 * d1 * d1)
    cdef double d2, a2 = 0.0
    if mu != 0.0:
        d2 = sqrt((q1 - 1.0 + mu) * (q1 - 1.0 + mu) + q2 * q2)
        a2 = mu / (d2 * d2 * d2)
    return (
        p1 + q2,
        p2 - q1,
        p2 - a1 * (q1 + mu) - a2 * (q1 - 1.0 + mu),
        -p1 - a1 * q2 - a2 * q2,
    )


def rhs_polar_cm(double t, y, double mu):
    cdef double r = y[0], th = y[1], R = y[2], Th = y[3]
    if mu == 0.0:
        return (R, Th / (r * r) - 1.0, Th * Th / (r * r * r) - 1.0 / (r * r), 0.0)
    cdef double ct = cos(th), st = sin(th)
    cdef double d1 = sqrt(r * r + 2.0 * r * mu * ct + mu * mu)
    cdef double d2 = sqrt(r * r - 2.0 * r * (1.0 - mu) * ct + (1.0 - mu) * (1.0 - mu))
    cdef double dV_dr = (
        -(1.0 - mu) * (r + mu * ct) / (d1 * d1 * d1)
        - mu * (r - (1.0 - mu) * ct) / (d2 * d2 * d2)
        + 1.0 / (r * r)
    )
    cdef double dV_dth = r * mu * (1.0 - mu) * st * (
        1.0 / (d1 * d1 * d1) - 1.0 / (d2 * d2 * d2)
    )
    return (
        R,
        Th / (r * r) - 1.0,
        Th * Th / (r * r * r) - 1.0 / (r * r) + dV_dr,
        dV_dth,
    )


def rhs_polar_p1(double t, y, double mu):
    cdef double r = y[0], th = y[1], R = y[2], Th = y[3]
    if mu == 0.0:
        return (R, Th / (r * r) - 1.0, Th * Th / (r * r * r) - 1.0 / (r * r), 0.0)
    cdef double ct = cos(th), st = sin(th)
    cdef double W = 1.0 + r * r - 2.0 * r * ct
    cdef double W32 = W * sqrt(W)
    return (
        R + mu * st,
        Th / (r * r) - 1.0 + mu * ct / r,
        Th * Th / (r * r * r) - 1.0 / (r * r) + mu / (r * r)
        + mu * Th * ct / (r * r) - mu * (r - ct) / W32,
        -mu * R * ct + mu * Th * st / r - mu * r * st / W32,
    )


def rhs_infinity(double t, y, double mu):
    cdef double xi = y[0], th = y[1], R = y[2], Th = y[3]
    cdef double xi2 = xi * xi, xi3 = xi * xi * xi, xi4 = xi * xi * xi * xi
    if mu == 0.0:
        return (
            -0.25 * R * xi3,
            0.25 * Th * xi4 - 1.0,
            -0.25 * xi4 + 0.125 * Th * Th * xi4 * xi2,
            0.0,
        )
    cdef double ct = cos(th), st = sin(th)
    cdef double omu = 1.0 - mu
    cdef double a = 1.0 + xi2 * mu * ct + 0.25 * xi4 * mu * mu
    cdef double b = 1.0 - xi2 * omu * ct + 0.25 * xi4 * omu * omu
    cdef double ra = sqrt(a), rb = sqrt(b)
    cdef double g = omu / ra + mu / rb - 1.0
    cdef double da = 2.0 * xi * mu * ct + xi3 * mu * mu
    cdef double db = -2.0 * xi * omu * ct + xi3 * omu * omu
    cdef double dg = -0.5 * omu * da / (a * ra) - 0.5 * mu * db / (b * rb)
    cdef double dV_dxi = xi * g + 0.5 * xi2 * dg
    cdef double dV_dth = 0.25 * xi4 * mu * omu * st * (1.0 / (a * ra) - 1.0 / (b * rb))
    return (
        -0.25 * R * xi3,
        0.25 * Th * xi4 - 1.0,
        -0.25 * xi4 + 0.125 * Th * Th * xi4 * xi2 - 0.25 * xi3 * dV_dxi,
        dV_dth,
    )


def rhs_regularized(double tau, y, double mu):
    cdef double r = y[0], th = y[1], v = y[2], u = y[3]
    cdef double r32 = r * sqrt(r)
    if mu == 0.0:
        return (
            r * v,
            u,
            0.5 * v * v + u * u + 2.0 * u * r32 + r * r * r - 1.0,
            -0.5 * u * v - 2.0 * v * r32,
        )
    cdef double ct = cos(th), st = sin(th)
    cdef double W = 1.0 + r * r - 2.0 * r * ct
    cdef double W32 = W * sqrt(W)
    return (
        r * v,
        u,
        0.5 * v * v + u * u + 2.0 * u * r32 + r * r * r - 1.0
        + mu * (1.0 - r * r * (ct + (r - ct) / W32)),
        -0.5 * u * v - 2.0 * v * r32 + mu * r * r * st * (1.0 - 1.0 / W32),
    )


cdef inline double _rho(double s, double theta, double mu, double h) nogil:
    cdef double s2 = s * s
    cdef double wt
    if mu == 0.0:
        return 2.0 * s2 * h + s2 * s2 * s2
    wt = 1.0 + s2 * s2 - 2.0 * s2 * cos(theta)
    return 2.0 * s2 * h + s2 * s2 * s2 - 2.0 * mu * s2 * (
        -0.5 * mu + s2 * cos(theta) - 1.0 / sqrt(wt)
    )


def rho_energy(s, theta, double mu, double h):
    if isinstance(s, float) or isinstance(s, int):
        return _rho(<double> s, <double> theta, mu, h)
    s_arr = np.asarray(s, dtype=np.float64)
    th_arr = np.broadcast_to(np.asarray(theta, dtype=np.float64), s_arr.shape)
    out = np.empty_like(s_arr)
    cdef double[::1] sv = np.ascontiguousarray(s_arr).ravel()
    cdef double[::1] tv = np.ascontiguousarray(th_arr).ravel()
    cdef double[::1] ov = out.ravel()
    cdef Py_ssize_t i, n = sv.shape[0]
    with nogil:
        for i in range(n):
            ov[i] = _rho(sv[i], tv[i], mu, h)
    return out


def rhs_reduced(double tau, y, double mu, double h):
    cdef double s = y[0], th = y[1], al = y[2]
    cdef double ca = cos(al), sa = sin(al)
    cdef double s2 = s * s, s3 = s * s * s, s4 = s2 * s2, s6 = s3 * s3
    cdef double rho0, P0
    if mu == 0.0:
        rho0 = 2.0 * s2 * h + s6
        P0 = sqrt(2.0 + rho0)
        return (
            0.5 * s * P0 * sa,
            P0 * ca,
            ca * (1.0 + rho0 + s6) / P0 + 2.0 * s3,
        )
    cdef double ct = cos(th), st = sin(th)
    cdef double wt = 1.0 + s4 - 2.0 * s2 * ct
    cdef double wt32 = wt * sqrt(wt)
    cdef double rho = 2.0 * s2 * h + s6 - 2.0 * mu * s2 * (-0.5 * mu + s2 * ct - 1.0 / sqrt(wt))
    cdef double P = sqrt(2.0 * (1.0 - mu) + rho)
    cdef double A = 1.0 - s4 * (ct + (s2 - ct) / wt32)
    cdef double B = s4 * st * (1.0 - 1.0 / wt32)
    return (
        0.5 * s * P * sa,
        P * ca,
        ca * (1.0 - 2.0 * mu + rho + s6) / P + 2.0 * s3 + mu * (A * ca - B * sa) / P,
    )


def rhs_collision_torus(double tau, y, double mu):
    cdef double al = y[1]
    cdef double m = sqrt(2.0 * (1.0 - mu))
    cdef double ca = cos(al)
    return (m * ca, 0.5 * m * ca)


def rhs_straightened_minus(double tau, y, double mu, double h):
    cdef double s = y[0], beta = y[1]
    cdef double m = sqrt(2.0 * (1.0 - mu))
    cdef double lam = (mu * mu + 2.0 * h + 2.0 * mu) / (4.0 * m)
    return (-0.5 * m * s, 0.5 * m * beta, 4.0 * lam * s * s * beta)


def rhs_straightened_plus(double tau, y, double mu, double h):
    cdef double s = y[0], iota = y[1]
    cdef double m = sqrt(2.0 * (1.0 - mu))
    cdef double lam = (mu * mu + 2.0 * h + 2.0 * mu) / (4.0 * m)
    return (0.5 * m * s, -0.5 * m * iota, -4.0 * lam * s * s * iota)


# ---------------------------------------------------------------------------
# Melnikov integrands


def melnikov_f1(s, double alpha):
    s_arr = np.ascontiguousarray(np.atleast_1d(np.asarray(s, dtype=np.float64)))
    out = np.empty_like(s_arr)
    cdef double[::1] sv = s_arr
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = sv.shape[0]
    cdef double s23, phi, D, c
    with nogil:
        for i in range(n):
            s23 = cbrt(sv[i])
            s23 = s23 * s23
            phi = alpha - sv[i]
            D = 1.0 + KAPPA2 * s23 * s23 - 2.0 * KAPPA * s23 * cos(phi)
            ov[i] = s23 * sin(phi) / (D * sqrt(D))
    return out if np.ndim(s) else float(out[0])


def melnikov_di1(s, double theta):
    s_arr = np.ascontiguousarray(np.atleast_1d(np.asarray(s, dtype=np.float64)))
    out = np.empty_like(s_arr)
    cdef double[::1] sv = s_arr
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = sv.shape[0]
    cdef double s23, s43, phi, D, D32, c, sn
    with nogil:
        for i in range(n):
            s23 = cbrt(sv[i])
            s23 = s23 * s23
            s43 = s23 * s23
            phi = theta - sv[i]
            c = cos(phi)
            sn = sin(phi)
            D = 1.0 + KAPPA2 * s43 - 2.0 * KAPPA * s23 * c
            D32 = D * sqrt(D)
            ov[i] = s23 * c / D32 - 3.0 * KAPPA * s43 * sn * sn / (D32 * D)
    return out if np.ndim(s) else float(out[0])


def melnikov_di1_envelope(s, dmin, smax):
    s_arr = np.ascontiguousarray(np.atleast_1d(np.asarray(s, dtype=np.float64)))
    d_arr = np.ascontiguousarray(
        np.broadcast_to(np.asarray(dmin, dtype=np.float64), s_arr.shape).astype(np.float64)
    )
    m_arr = np.ascontiguousarray(
        np.broadcast_to(np.asarray(smax, dtype=np.float64), s_arr.shape).astype(np.float64)
    )
    out = np.empty_like(s_arr)
    cdef double[::1] sv = s_arr
    cdef double[::1] dv = d_arr
    cdef double[::1] mv = m_arr
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = sv.shape[0]
    cdef double s23, s43, rt, d32, d52, d72
    with nogil:
        for i in range(n):
            s23 = cbrt(sv[i])
            s23 = s23 * s23
            s43 = s23 * s23
            rt = sqrt(dv[i])
            d32 = dv[i] * rt
            d52 = d32 * dv[i]
            d72 = d52 * dv[i]
            ov[i] = (
                mv[i] * s23 / d32
                + 9.0 * KAPPA * mv[i] * s43 / d52
                + 15.0 * KAPPA2 * mv[i] * mv[i] * mv[i] * s43 * s23 / d72
            )
    return out if np.ndim(s) else float(out[0])


# ---------------------------------------------------------------------------
# adaptive Gauss-Kronrod quadrature of the certification integrands

cdef double[15] XGK
cdef double[15] WGK
cdef double[7] WG
XGK[0] = -0.9914553711208126; XGK[14] = 0.9914553711208126
XGK[1] = -0.9491079123427585; XGK[13] = 0.9491079123427585
XGK[2] = -0.8648644233597691; XGK[12] = 0.8648644233597691
XGK[3] = -0.7415311855993944; XGK[11] = 0.7415311855993944
XGK[4] = -0.5860872354676911; XGK[10] = 0.5860872354676911
XGK[5] = -0.4058451513773972; XGK[9] = 0.4058451513773972
XGK[6] = -0.2077849550078985; XGK[8] = 0.2077849550078985
XGK[7] = 0.0
WGK[0] = 0.02293532201052922; WGK[14] = 0.02293532201052922
WGK[1] = 0.06309209262997855; WGK[13] = 0.06309209262997855
WGK[2] = 0.1047900103222502;  WGK[12] = 0.1047900103222502
WGK[3] = 0.1406532597155259;  WGK[11] = 0.1406532597155259
WGK[4] = 0.1690047266392679;  WGK[10] = 0.1690047266392679
WGK[5] = 0.1903505780647854;  WGK[9] = 0.1903505780647854
WGK[6] = 0.2044329400752989;  WGK[8] = 0.2044329400752989
WGK[7] = 0.2094821410847278
WG[0] = 0.1294849661688697; WG[6] = 0.1294849661688697
WG[1] = 0.2797053914892767; WG[5] = 0.2797053914892767
WG[2] = 0.3818300505051189; WG[4] = 0.3818300505051189
WG[3] = 0.4179591836734694

from libc.math cimport fabs, ceil, floor, asin
cdef double PI = 3.141592653589793238462643383279502884
cdef double TWO_PI_C = 2.0 * PI


cdef inline double _di1_scalar(double s, double theta) nogil:
    cdef double s23 = cbrt(s)
    s23 = s23 * s23
    cdef double s43 = s23 * s23
    cdef double phi = theta - s
    cdef double c = cos(phi)
    cdef double sn = sin(phi)
    cdef double D = 1.0 + KAPPA2 * s43 - 2.0 * KAPPA * s23 * c
    cdef double D32 = D * sqrt(D)
    return s23 * c / D32 - 3.0 * KAPPA * s43 * sn * sn / (D32 * D)


cdef inline double _env_scalar(double s, double ta, double tb) nogil:
    cdef double a = ta - s
    cdef double b = tb - s
    cdef double ca = cos(a), cb = cos(b)
    cdef double sa = sin(a), sb = sin(b)
    cdef double cmax, smax, k
    k = ceil(a / TWO_PI_C)
    if k * TWO_PI_C <= b:
        cmax = 1.0
    else:
        cmax = ca if ca > cb else cb
    k = ceil((a - 0.5 * PI) / PI)
    if 0.5 * PI + k * PI <= b:
        smax = 1.0
    else:
        smax = fabs(sa) if fabs(sa) > fabs(sb) else fabs(sb)
    cdef double s23 = cbrt(s)
    s23 = s23 * s23
    cdef double s43 = s23 * s23
    cdef double dmin = 1.0 + KAPPA2 * s43 - 2.0 * KAPPA * s23 * cmax
    if dmin < 1e-300:
        dmin = 1e-300
    cdef double rt = sqrt(dmin)
    cdef double d32 = dmin * rt
    cdef double d52 = d32 * dmin
    cdef double d72 = d52 * dmin
    return (
        smax * s23 / d32
        + 9.0 * KAPPA * smax * s43 / d52
        + 15.0 * KAPPA2 * smax * smax * smax * s43 * s23 / d72
    )


cdef int _gk15(int kind, double p1, double p2, double a, double b,
               double* out_val, double* out_err) nogil:
    cdef double mid = 0.5 * (a + b)
    cdef double half = 0.5 * (b - a)
    cdef double k15 = 0.0, g7 = 0.0, fv, x
    cdef int i, j = 0
    for i in range(15):
        x = mid + half * XGK[i]
        if kind == 0:
            fv = _di1_scalar(x, p1)
        else:
            fv = _env_scalar(x, p1, p2)
        k15 += WGK[i] * fv
        if i % 2 == 1:
            g7 += WG[j] * fv
            j += 1
    out_val[0] = k15 * half
    out_err[0] = fabs(k15 - g7) * half
    return 0


def quad_cert(int kind, double p1, double p2, double a, double b,
              double panel_max, double target, int max_depth):
    """Adaptive GK15 of the certification integrands.

    kind 0: the derivative integrand at theta = p1;
    kind 1: the |d/dtheta| envelope over [p1, p2].
    """
    cdef int n0 = <int> ceil((b - a) / panel_max)
    if n0 < 1:
        n0 = 1
    cdef Py_ssize_t cap = 4096
    stack = np.empty((cap, 3))
    cdef double[:, ::1] st = stack
    cdef Py_ssize_t top = 0
    cdef int i
    cdef double w = (b - a) / n0
    for i in range(n0):
        st[top, 0] = a + i * w
        st[top, 1] = a + (i + 1) * w
        st[top, 2] = 0.0
        top += 1
        if top >= cap - 2:
            cap *= 2
            stack = np.resize(stack, (cap, 3))
            st = stack
    cdef double total_v = 0.0, total_e = 0.0
    cdef double va, er, lo, hi, depth
    with nogil:
        while top > 0:
            top -= 1
            lo = st[top, 0]
            hi = st[top, 1]
            depth = st[top, 2]
            _gk15(kind, p1, p2, lo, hi, &va, &er)
            if er <= target or depth >= max_depth:
                total_v += va
                total_e += er
            else:
                with gil:
                    if top >= cap - 2:
                        cap *= 2
                        stack = np.resize(stack, (cap, 3))
                        st = stack
                st[top, 0] = lo
                st[top, 1] = 0.5 * (lo + hi)
                st[top, 2] = depth + 1.0
                st[top + 1, 0] = 0.5 * (lo + hi)
                st[top + 1, 1] = hi
                st[top + 1, 2] = depth + 1.0
                top += 2
    return total_v, total_e
