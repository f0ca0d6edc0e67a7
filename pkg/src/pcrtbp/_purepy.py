"""Pure-Python kernel implementations.

Same call signatures as the compiled module ``pcrtbp._core``; the backend
module picks one of the two at import time.  Right-hand sides take and
return plain float sequences, integrand kernels are numpy-vectorized.
"""

import math

import numpy as np

from .constants import KAPPA

_KAPPA2 = KAPPA * KAPPA

# ---------------------------------------------------------------------------
# vector fields


def rhs_cartesian(t, y, mu):
    q1, q2, p1, p2 = y
    d1 = math.sqrt((q1 + mu) ** 2 + q2 * q2)
    a1 = (1.0 - mu) / d1**3
    if mu != 0.0:
        d2 = math.sqrt((q1 - 1.0 + mu) ** 2 + q2 * q2)
        a2 = mu / d2**3
    else:
        a2 = 0.0
    return (
        p1 + q2,
        p2 - q1,
        p2 - a1 * (q1 + mu) - a2 * (q1 - 1.0 + mu),
        -p1 - a1 * q2 - a2 * q2,
    )


def rhs_polar_cm(t, y, mu):
    r, th, R, Th = y
    if mu == 0.0:
        return (R, Th / (r * r) - 1.0, Th * Th / r**3 - 1.0 / (r * r), 0.0)
    ct = math.cos(th)
    st = math.sin(th)
    d1 = math.sqrt(r * r + 2.0 * r * mu * ct + mu * mu)
    d2 = math.sqrt(r * r - 2.0 * r * (1.0 - mu) * ct + (1.0 - mu) ** 2)
    # V = (1-mu)/d1 + mu/d2 - 1/r
    dV_dr = (
        -(1.0 - mu) * (r + mu * ct) / d1**3
        - mu * (r - (1.0 - mu) * ct) / d2**3
        + 1.0 / (r * r)
    )
    dV_dth = r * mu * (1.0 - mu) * st * (1.0 / d1**3 - 1.0 / d2**3)
    return (
        R,
        Th / (r * r) - 1.0,
        Th * Th / r**3 - 1.0 / (r * r) + dV_dr,
        dV_dth,
    )


def rhs_polar_p1(t, y, mu):
    r, th, R, Th = y
    if mu == 0.0:
        return (R, Th / (r * r) - 1.0, Th * Th / r**3 - 1.0 / (r * r), 0.0)
    ct = math.cos(th)
    st = math.sin(th)
    W = 1.0 + r * r - 2.0 * r * ct
    W32 = W * math.sqrt(W)
    return (
        R + mu * st,
        Th / (r * r) - 1.0 + mu * ct / r,
        Th * Th / r**3 - 1.0 / (r * r) + mu / (r * r) + mu * Th * ct / (r * r) - mu * (r - ct) / W32,
        -mu * R * ct + mu * Th * st / r - mu * r * st / W32,
    )


def rhs_infinity(t, y, mu):
    xi, th, R, Th = y
    xi2 = xi * xi
    xi3 = xi2 * xi
    xi4 = xi2 * xi2
    if mu == 0.0:
        return (
            -0.25 * R * xi3,
            0.25 * Th * xi4 - 1.0,
            -0.25 * xi4 + 0.125 * Th * Th * xi4 * xi2,
            0.0,
        )
    ct = math.cos(th)
    st = math.sin(th)
    a = 1.0 + xi2 * mu * ct + 0.25 * xi4 * mu * mu
    b = 1.0 - xi2 * (1.0 - mu) * ct + 0.25 * xi4 * (1.0 - mu) ** 2
    ra = math.sqrt(a)
    rb = math.sqrt(b)
    g = (1.0 - mu) / ra + mu / rb - 1.0
    da_dxi = 2.0 * xi * mu * ct + xi3 * mu * mu
    db_dxi = -2.0 * xi * (1.0 - mu) * ct + xi3 * (1.0 - mu) ** 2
    dg_dxi = -0.5 * (1.0 - mu) * da_dxi / (a * ra) - 0.5 * mu * db_dxi / (b * rb)
    dV_dxi = xi * g + 0.5 * xi2 * dg_dxi
    dV_dth = 0.25 * xi4 * mu * (1.0 - mu) * st * (1.0 / (a * ra) - 1.0 / (b * rb))
    return (
        -0.25 * R * xi3,
        0.25 * Th * xi4 - 1.0,
        -0.25 * xi4 + 0.125 * Th * Th * xi4 * xi2 - 0.25 * xi3 * dV_dxi,
        dV_dth,
    )


def rhs_regularized(tau, y, mu):
    r, th, v, u = y
    r32 = r * math.sqrt(r)
    if mu == 0.0:
        return (
            r * v,
            u,
            0.5 * v * v + u * u + 2.0 * u * r32 + r**3 - 1.0,
            -0.5 * u * v - 2.0 * v * r32,
        )
    ct = math.cos(th)
    st = math.sin(th)
    W = 1.0 + r * r - 2.0 * r * ct
    W32 = W * math.sqrt(W)
    return (
        r * v,
        u,
        0.5 * v * v + u * u + 2.0 * u * r32 + r**3 - 1.0
        + mu * (1.0 - r * r * (ct + (r - ct) / W32)),
        -0.5 * u * v - 2.0 * v * r32 + mu * r * r * st * (1.0 - 1.0 / W32),
    )


def rho_energy(s, theta, mu, h):
    """rho on the energy manifold {M = 0}.  Accepts scalars or arrays."""
    s2 = s * s
    if mu == 0.0:
        return 2.0 * s2 * h + s2**3
    wt = 1.0 + s2 * s2 - 2.0 * s2 * np.cos(theta)
    return 2.0 * s2 * h + s2**3 - 2.0 * mu * s2 * (
        -0.5 * mu + s2 * np.cos(theta) - 1.0 / np.sqrt(wt)
    )


def rhs_reduced(tau, y, mu, h):
    s, th, al = y
    ca = math.cos(al)
    sa = math.sin(al)
    s2 = s * s
    s3 = s2 * s
    s6 = s3 * s3
    if mu == 0.0:
        rho = 2.0 * s2 * h + s6
        P = math.sqrt(2.0 + rho)
        return (
            0.5 * s * P * sa,
            P * ca,
            ca * (1.0 + rho + s6) / P + 2.0 * s3,
        )
    ct = math.cos(th)
    st = math.sin(th)
    s4 = s2 * s2
    wt = 1.0 + s4 - 2.0 * s2 * ct
    wt32 = wt * math.sqrt(wt)
    rho = 2.0 * s2 * h + s6 - 2.0 * mu * s2 * (-0.5 * mu + s2 * ct - 1.0 / math.sqrt(wt))
    P = math.sqrt(2.0 * (1.0 - mu) + rho)
    # alpha' written via d/dtau atan2(v, u); regular where sin(alpha) = 0.
    A = 1.0 - s4 * (ct + (s2 - ct) / wt32)
    B = s4 * st * (1.0 - 1.0 / wt32)
    return (
        0.5 * s * P * sa,
        P * ca,
        ca * (1.0 - 2.0 * mu + rho + s6) / P + 2.0 * s3 + mu * (A * ca - B * sa) / P,
    )


def rhs_collision_torus(tau, y, mu):
    th, al = y
    m = math.sqrt(2.0 * (1.0 - mu))
    ca = math.cos(al)
    return (m * ca, 0.5 * m * ca)


def rhs_straightened_minus(tau, y, mu, h):
    s, beta, z = y
    m = math.sqrt(2.0 * (1.0 - mu))
    lam = (mu * mu + 2.0 * h + 2.0 * mu) / (4.0 * m)
    return (-0.5 * m * s, 0.5 * m * beta, 4.0 * lam * s * s * beta)


def rhs_straightened_plus(tau, y, mu, h):
    s, iota, w = y
    m = math.sqrt(2.0 * (1.0 - mu))
    lam = (mu * mu + 2.0 * h + 2.0 * mu) / (4.0 * m)
    return (0.5 * m * s, -0.5 * m * iota, -4.0 * lam * s * s * iota)


# ---------------------------------------------------------------------------
# Melnikov integrand kernels (vectorized over the integration variable)


def melnikov_f1(s, alpha):
    """First integrand of M+: s^(2/3) sin(alpha-s) / D^(3/2)."""
    s23 = np.cbrt(s) ** 2
    phi = alpha - s
    D = 1.0 + _KAPPA2 * s23 * s23 - 2.0 * KAPPA * s23 * np.cos(phi)
    return s23 * np.sin(phi) / (D * np.sqrt(D))


def melnikov_di1(s, theta):
    """Integrand of I1, the quadrature part of dM+/dtheta."""
    s23 = np.cbrt(s) ** 2
    phi = theta - s
    c = np.cos(phi)
    sn = np.sin(phi)
    D = 1.0 + _KAPPA2 * s23 * s23 - 2.0 * KAPPA * s23 * c
    D32 = D * np.sqrt(D)
    return s23 * c / D32 - 3.0 * KAPPA * s23 * s23 * sn * sn / (D32 * D)


def melnikov_di1_envelope(s, dmin, smax):
    """Upper bound for |d/dtheta of the I1 integrand|.

    Uses a lower bound on the denominator D and an upper bound on |sin phi|
    over the theta subinterval; every term of the derivative carries at
    least one factor of sin phi, the last a cube.
    """
    s23 = np.cbrt(s) ** 2
    s43 = s23 * s23
    rt = np.sqrt(dmin)
    d32 = dmin * rt
    d52 = d32 * dmin
    d72 = d52 * dmin
    return (
        smax * s23 / d32
        + 9.0 * KAPPA * smax * s43 / d52
        + 15.0 * _KAPPA2 * smax**3 * s43 * s23 / d72
    )


def quad_cert(kind, p1, p2, a, b, panel_max, target, max_depth):
    """Adaptive GK15 of the certification integrands (numpy fallback).

    kind 0: the derivative integrand at theta = p1;
    kind 1: the |d/dtheta| envelope over [p1, p2].
    """
    from .melnikov import QuadratureBudget, gauss_kronrod_panels, _phi_interval_bounds

    budget = QuadratureBudget(
        c=min(a, 1e-4), C=max(b, 10.0), panel_max=panel_max,
        panel_target=target, max_depth=max_depth,
    )
    if kind == 0:
        return gauss_kronrod_panels(lambda s: melnikov_di1(s, p1), a, b, budget)

    def envelope(s):
        cmax, smax = _phi_interval_bounds(s, p1, p2)
        s23 = np.cbrt(s) ** 2
        dmin = 1.0 + _KAPPA2 * s23 * s23 - 2.0 * KAPPA * s23 * cmax
        dmin = np.maximum(dmin, 1e-300)
        return melnikov_di1_envelope(s, dmin, smax)

    return gauss_kronrod_panels(envelope, a, b, budget)
