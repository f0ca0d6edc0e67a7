"""Near-collision transition map between the two sides of the section s = delta.

Works in the straightened coordinates around the equilibrium circles:
on the S^- side (s, beta_t, z) and on the S^+ side (s, iota_t, w).  The
straightening is implemented to cubic order, which is exact enough for the
verification tolerances here:

  beta = alpha + pi/2,  y = theta - 2 beta,   beta_t = beta + s^3/m0,
  z = y - (8 / (3 m0)) s^3,
  iota = alpha - pi/2,  x = theta - 2 iota,   iota_t = iota - s^3/m0,
  w = x + (8 / (3 m0)) s^3.

The cubic terms are the leading coefficients of the invariant-manifold and
fiber graphs (the quartic coefficients vanish and the quintic ones carry a
factor lambda(mu, h), so the truncation error at s = delta is far below the
transit tolerances).  The map itself is computed by direct integration of
the reduced field, not from a normal form.
"""

import json
import math
from dataclasses import dataclass, field as dfield

import numpy as np

from . import flow
from .fields import m0 as _m0
from .flow import EventSpec, IntegratorConfig


def straighten_minus(s, theta, alpha, mu):
    """(s, theta, alpha) near S^- -> (s, beta_t, z)."""
    m = _m0(mu)
    beta = alpha + 0.5 * math.pi
    y = theta - 2.0 * beta
    return s, beta + s**3 / m, y - (8.0 / (3.0 * m)) * s**3


def unstraighten_minus(s, beta_t, z, mu):
    m = _m0(mu)
    beta = beta_t - s**3 / m
    y = z + (8.0 / (3.0 * m)) * s**3
    return s, y + 2.0 * beta, beta - 0.5 * math.pi


def straighten_plus(s, theta, alpha, mu):
    """(s, theta, alpha) near S^+ -> (s, iota_t, w)."""
    m = _m0(mu)
    iota = alpha - 0.5 * math.pi
    x = theta - 2.0 * iota
    return s, iota - s**3 / m, x + (8.0 / (3.0 * m)) * s**3


def unstraighten_plus(s, iota_t, w, mu):
    m = _m0(mu)
    iota = iota_t + s**3 / m
    x = w - (8.0 / (3.0 * m)) * s**3
    return s, x + 2.0 * iota, iota + 0.5 * math.pi


def minus_section_state(nu, z, delta, mu, h):
    """Reduced-chart state of the point (delta, nu, z) on the entry section."""
    s, theta, alpha = unstraighten_minus(delta, nu, z, mu)
    return np.array([s, theta, alpha])


@dataclass
class TransitResult:
    nu: float
    z_in: float
    iota_out: float
    w_out: float
    s_min: float
    classification: str
    tau_exit: float
    intermediate: dict = dfield(default_factory=dict)
    trajectory: object = None


@dataclass
class TransitReport:
    delta: float
    mu: float
    h: float
    nu: np.ndarray
    iota_out: np.ndarray
    w_out: np.ndarray
    z_in: np.ndarray
    s_min: np.ndarray
    c1_fit: float
    c1_max: float
    c2_fit: float
    c2_max: float
    loglog_slope_w: float
    tangent_limit: tuple
    limit_point: tuple

    def to_json(self, path):
        payload = {
            "delta": self.delta,
            "mu": self.mu,
            "h": self.h,
            "c1_fit": self.c1_fit,
            "c1_max": self.c1_max,
            "c2_fit": self.c2_fit,
            "c2_max": self.c2_max,
            "loglog_slope_w": self.loglog_slope_w,
            "tangent_limit": list(self.tangent_limit),
            "limit_point": list(self.limit_point),
            "n_points": int(self.nu.size),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("nu,iota_out,w_out,s_min\n")
            for row in zip(self.nu, self.iota_out, self.w_out, self.s_min):
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def transit(
    nu: float,
    z_in: float,
    mu: float,
    h: float,
    delta: float,
    config: IntegratorConfig | None = None,
    keep_trajectory: bool = False,
) -> TransitResult:
    """Map a point of the entry section to the exit section across collision.

    The input point is (s, beta_t, z) = (delta, nu, z_in) on the side
    beta_t > 0; the output is reported in the S^+ straightened coordinates
    (iota_t, w) at s = delta.  nu = 0 returns the continuous extension
    (delta, 0, z_in).
    """
    if nu < 0.0:
        raise ValueError("transit is defined for nu >= 0")
    if nu == 0.0:
        return TransitResult(0.0, z_in, 0.0, z_in, 0.0, "extension", 0.0)
    cfg = config or IntegratorConfig()
    state0 = minus_section_state(nu, z_in, delta, mu, h)
    m = _m0(mu)
    # intermediate sections of the passage, recorded for diagnostics:
    # beta_t = delta (leaving the S^- block) and beta = pi - delta
    # (entering the S^+ block, i.e. alpha = pi/2 - delta).
    ev1 = EventSpec(
        lambda y: (y[2] + 0.5 * math.pi + y[0] ** 3 / m) - delta,
        direction=+1,
        terminal=False,
        name="sigma1+",
    )
    ev2 = EventSpec(
        lambda y: y[2] - (0.5 * math.pi - delta),
        direction=+1,
        terminal=False,
        name="sigma2-",
    )
    tau_cap = max(200.0, 8.0 * math.log(max(delta / nu, 10.0)) / m)
    traj = flow.integrate_through_collision(
        state0, mu, h, delta, cfg, extra_events=(ev1, ev2), tau_max=tau_cap
    )
    s, theta, alpha = traj.y[-1]
    _, iota_t, w = straighten_plus(s, theta, alpha, mu)
    # the passage along the heteroclinic winds theta by 2 pi; the fiber
    # label lives on the circle, so report it on the input branch
    w = z_in + math.remainder(w - z_in, 2.0 * math.pi)
    inter = {}
    for hit in traj.events:
        if hit.name in ("sigma1+", "sigma2-") and hit.name not in inter:
            inter[hit.name] = {"tau": hit.time, "s": float(hit.state[0])}
    return TransitResult(
        nu,
        z_in,
        float(iota_t),
        float(w),
        traj.flags["s_min"],
        traj.flags["classification"],
        float(traj.t[-1]),
        inter,
        traj if keep_trajectory else None,
    )


def verify_transition_estimates(
    delta: float,
    nu_grid,
    mu: float,
    h: float,
    z_in=lambda nu: 0.0,
    config: IntegratorConfig | None = None,
) -> TransitReport:
    """Run the transit over a nu grid and fit the transition-estimate constants.

    Fits C1 in |iota_out + nu| <= C1 delta nu and C2 in
    |w_out - z_in| <= C2 (delta^2 nu + nu^2), both as least-squares slopes
    and as max ratios.  Also measures the log-log slope of |w_out - z_in|
    over the top decade of nu and the limit tangent at the smallest nu.
    """
    nu_arr = np.asarray(sorted(nu_grid), dtype=float)
    res = [transit(float(nu), float(z_in(nu)), mu, h, delta, config) for nu in nu_arr]
    bad = [r for r in res if r.classification != "transit"]
    if bad:
        raise RuntimeError(f"{len(bad)} transits did not reach the exit section")
    iota = np.array([r.iota_out for r in res])
    w = np.array([r.w_out for r in res])
    zs = np.array([r.z_in for r in res])
    smin = np.array([r.s_min for r in res])

    e1 = np.abs(iota + nu_arr)
    x1 = delta * nu_arr
    c1_fit = float(np.dot(x1, e1) / np.dot(x1, x1))
    c1_max = float(np.max(e1 / x1))
    e2 = np.abs(w - zs)
    x2 = delta**2 * nu_arr + nu_arr**2
    c2_fit = float(np.dot(x2, e2) / np.dot(x2, x2))
    c2_max = float(np.max(e2 / x2))

    top = nu_arr >= nu_arr[-1] / 10.0
    wdev = np.maximum(e2[top], 1e-300)
    slope = float(np.polyfit(np.log(nu_arr[top]), np.log(wdev), 1)[0]) if top.sum() > 2 else float("nan")

    # tangent of the image curve at the smallest nu, one-sided difference
    d_nu = nu_arr[1] - nu_arr[0]
    tangent = (
        0.0,
        float((iota[1] - iota[0]) / d_nu),
        float((w[1] - w[0]) / d_nu),
    )
    nu_small = float(nu_arr[0])
    limit = (delta, float(iota[0]), float(w[0]))
    if not np.all(np.diff(smin) >= 0):
        # s_min should grow with nu (linear scaling); non-monotone data means
        # the fit cannot be trusted
        raise RuntimeError("fit failed: s_min not monotone in nu")
    return TransitReport(
        delta, mu, h, nu_arr, iota, w, zs, smin,
        c1_fit, c1_max, c2_fit, c2_max, slope, tangent, limit,
    )
