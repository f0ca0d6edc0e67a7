"""Orbit-level constructions on top of the manifold machinery.

* ejection-collision orbits with large excursions, found by propagating the
  unstable collision-manifold curve through a near-infinity excursion and
  intersecting its return with the stable collision-manifold curve;
* the triple-intersection energy, matching the two transverse-intersection
  angles through the near-collision transition map;
* a finite-horizon heuristic classifier of final motions.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import flow, localmap, manifolds, melnikov
from .charts import (
    cm_polar_to_p1_polar_arrays,
    collision_to_polar_arrays,
    p1_polar_to_cm_polar_arrays,
    polar_to_collision_arrays,
    wrap_angle,
)
from .backend import kernels
from .constants import TWO_PI
from .fields import FieldId
from .flow import EventSpec, IntegratorConfig
from .manifolds import FiberSeed, SectionSpec

R_SWITCH_OUT = 55.0  # CM radius: hand over to the compactified chart
R_SWITCH_IN = 45.0   # and back (hysteresis band avoids chattering)
R_ESCAPE = 1000.0


@dataclass
class ExcursionResult:
    theta: float          # P1 section angle at return, unwrapped
    Theta: float
    R: float
    r_max: float
    t_flight: float
    windings: float
    escaped: bool
    min_p2_distance: float
    e2_at_escape: float | None = None


@dataclass
class EcoOrbit:
    mu: float
    h: float
    theta_bar_plus: float    # ejection fiber angle
    theta_bar_minus: float   # collision fiber angle
    k: int                   # excursion index (wrap count above the first found)
    max_radius: float
    residual: float
    theta_out: float         # section angle leaving collision (Sigma_h^>)
    theta_in: float          # section angle returning (Sigma_h^<), wrapped
    t_flight: float
    windings: float
    min_p2_distance: float

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class TripleIntersectionResult:
    mu: float
    delta: float
    h_star: float
    theta_plus: float
    theta_gt: float          # theta_> of the upper-branch intersection
    theta_lt: float          # theta_< of the lower-branch intersection
    slope_inf_s: float       # Theta_inf_s'(theta_>)
    slope_col_u: float       # Theta_Splus_u'(theta_>)
    slope_inf_u_mapped: float  # Theta_inf_u,>'(theta_>) through the local map
    angle_A: float
    angle_B: float
    d_plus_slope: float
    d_minus_slope: float
    melnikov_at_zero: float
    gap_residual: float

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


# ---------------------------------------------------------------------------
# excursion propagation with chart switching


def _to_cm(y_p1, mu):
    return np.asarray(p1_polar_to_cm_polar_arrays(*y_p1, mu))


def _to_p1(y_cm, mu):
    return np.asarray(cm_polar_to_p1_polar_arrays(*y_cm, mu))


def _r_p1_vec(mu):
    def g(ys):
        # CM polar state -> P1-centered radius (P1 sits at (-mu, 0))
        return np.sqrt(ys[0] ** 2 + 2.0 * ys[0] * mu * np.cos(ys[1]) + mu * mu)

    return g


def propagate_excursion(
    theta: float,
    Theta: float,
    mu: float,
    section: SectionSpec,
    config: IntegratorConfig | None = None,
    t_max: float = 2e5,
) -> ExcursionResult:
    """First return from Sigma_h^> to Sigma_h^<, through the far excursion.

    Integrates in the CM polar chart for radii up to ~50 and in the
    compactified chart beyond, switching on a hysteresis band.  Orbits
    reaching r = 1000 are classified by the sign of their two-body energy
    and reported as escaped.
    """
    cfg = config or IntegratorConfig(max_time=t_max)
    h = section.h
    R = manifolds.solve_radial_momentum(section.r_star, theta, Theta, mu, h, positive=True)
    y_p1 = np.array([section.r_star, theta, R, Theta])
    y_cm = _to_cm(y_p1, mu)
    # keep the CM angle on the same branch as the P1 angle
    y_cm[1] = theta + math.remainder(y_cm[1] - theta, TWO_PI)

    r_p1_of = _r_p1_vec(mu)
    t = 0.0
    r_max = float(y_cm[0])
    windings0 = y_cm[1]
    min_d2 = math.inf
    chart = "cm"
    while t < t_max:
        if chart == "cm":
            events = (
                EventSpec(
                    lambda y: float(r_p1_of(np.asarray(y)[:, None])[0]) - section.r_star,
                    direction=-1,
                    terminal=True,
                    name="return",
                    g_vec=lambda ys: r_p1_of(ys) - section.r_star,
                ),
                EventSpec(
                    lambda y: y[0] - R_SWITCH_OUT,
                    direction=+1,
                    terminal=True,
                    name="switch-out",
                    g_vec=lambda ys: ys[0] - R_SWITCH_OUT,
                ),
                EventSpec(
                    lambda y: y[2],
                    direction=-1,
                    terminal=False,
                    name="apoapsis",
                    g_vec=lambda ys: ys[2],
                ),
            )
            traj = flow.integrate(
                FieldId.POLAR_CM, y_cm, (t, t + cfg.max_time), mu, h, cfg, events
            )
            r_max = max(r_max, float(np.max(traj.y[:, 0])))
            d2 = np.sqrt(1.0 + traj.y[:, 0] ** 2 - 2.0 * traj.y[:, 0] * np.cos(traj.y[:, 1]))
            min_d2 = min(min_d2, float(np.min(d2)))
            for hit in traj.events:
                if hit.name == "apoapsis":
                    r_max = max(r_max, float(hit.state[0]))
            term = traj.flags.get("terminal_event")
            t = float(traj.t[-1])
            y_cm = traj.y[-1].copy()
            if term == "return":
                y_p1 = _to_p1(y_cm, mu)
                th_p1 = y_cm[1] + math.remainder(y_p1[1] - y_cm[1], TWO_PI)
                return ExcursionResult(
                    float(th_p1),
                    float(y_p1[3]),
                    float(y_p1[2]),
                    r_max,
                    t,
                    float((windings0 - y_cm[1]) / TWO_PI),
                    False,
                    min_d2,
                )
            if term == "switch-out":
                chart = "inf"
                continue
            return ExcursionResult(
                float(y_cm[1]), float(y_cm[3]), float(y_cm[2]), r_max, t,
                float((windings0 - y_cm[1]) / TWO_PI), False, min_d2,
            )
        else:
            xi_in = math.sqrt(2.0 / R_SWITCH_IN)
            xi_esc = math.sqrt(2.0 / R_ESCAPE)
            y_inf = np.array(
                [math.sqrt(2.0 / y_cm[0]), y_cm[1], y_cm[2], y_cm[3]]
            )
            events = (
                EventSpec(
                    lambda y: y[0] - xi_in,
                    direction=+1,
                    terminal=True,
                    name="switch-in",
                    g_vec=lambda ys: ys[0] - xi_in,
                ),
                EventSpec(
                    lambda y: y[0] - xi_esc,
                    direction=-1,
                    terminal=True,
                    name="escape",
                    g_vec=lambda ys: ys[0] - xi_esc,
                ),
                EventSpec(
                    lambda y: y[2],
                    direction=+1,
                    terminal=False,
                    name="apoapsis",
                    g_vec=lambda ys: ys[2],
                ),
            )
            traj = flow.integrate(
                FieldId.INFINITY, y_inf, (t, t + cfg.max_time), mu, h, cfg, events
            )
            r_max = max(r_max, float(2.0 / np.min(traj.y[:, 0]) ** 2))
            term = traj.flags.get("terminal_event")
            t = float(traj.t[-1])
            y_end = traj.y[-1]
            y_cm = np.array([2.0 / y_end[0] ** 2, y_end[1], y_end[2], y_end[3]])
            if term == "switch-in":
                chart = "cm"
                continue
            e2 = 0.5 * (y_cm[2] ** 2 + (y_cm[3] / y_cm[0]) ** 2) - 1.0 / y_cm[0]
            return ExcursionResult(
                float(y_cm[1]), float(y_cm[3]), float(y_cm[2]), r_max, t,
                float((windings0 - y_cm[1]) / TWO_PI), True, min_d2, float(e2),
            )
    raise RuntimeError("excursion exceeded the time budget")


# ---------------------------------------------------------------------------
# ejection-collision orbits


def _return_map_factory(mu, section, s0, config):
    """theta_bar -> (ExcursionResult, theta at Sigma_h^>) for W^u(S+) fibers."""
    cache = {}

    def F(theta_bar):
        if theta_bar in cache:
            return cache[theta_bar]
        hit = manifolds.trace_collision_manifold(
            FiberSeed("+", float(theta_bar), s0), section, mu, config
        )
        exc = propagate_excursion(hit.theta, hit.Theta, mu, section, config)
        cache[theta_bar] = (exc, hit.theta)
        return cache[theta_bar]

    return F


def find_ecos(
    mu: float,
    h: float,
    k_max: int = 3,
    section: SectionSpec | None = None,
    config: IntegratorConfig | None = None,
    s0: float = 1e-4,
    n_probe: int = 7,
    wrap_stride: int | None = None,
    residual_tol: float = 1e-8,
) -> list[EcoOrbit]:
    """Ejection-collision orbits with successively larger excursions.

    Works at energies |h| small compared to mu (the transverse-intersection
    regime).  Seeds the unstable curve of S^+ near its largest separation
    from the stable infinity manifold (shortest flights), builds the wrap
    map of the return angle, and intersects selected wraps of the returned
    curve with the stable curve of S^-.  Wraps are spaced so consecutive
    orbits gain more than one unit of maximal radius.
    """
    section = section or SectionSpec(delta=0.2, h=h)
    cfg = config or IntegratorConfig()
    theta_hat_0 = -h

    # pick the seed region: largest positive d+ over the admissible circle
    probe = np.linspace(-math.pi, math.pi, 61)
    best_th, best_d = None, 0.0
    col_curve = manifolds.collision_curve("+", mu, section, n=96, s0=s0, config=cfg)
    inf_curve = manifolds.infinity_curve(theta_hat_0, mu, section, n=72, config=cfg)
    for th in probe:
        try:
            d = float(inf_curve(th) - col_curve(th))
        except ValueError:
            continue
        if d > best_d:
            best_d, best_th = d, float(th)
    if best_th is None:
        raise RuntimeError("no returning side: d+ never positive on the section")

    F = _return_map_factory(mu, section, s0, cfg)
    tb0 = float(col_curve.fiber_angle(best_th))
    exc0, _ = F(tb0)
    if exc0.escaped:
        raise RuntimeError("seed at the maximal separation escaped; lower |h|")

    # local wrap map: d theta_ret / d theta_bar (large and negative)
    d_tb = 1e-6
    exc1, _ = F(tb0 + d_tb)
    slope = (exc1.theta - exc0.theta) / d_tb

    def theta_ret(tb):
        return F(tb)[0].theta

    def seek(target, tb_guess, sl, tol=1e-3):
        """theta_bar whose return angle hits ``target`` (secant iteration)."""
        tb, val = tb_guess, theta_ret(tb_guess)
        for _ in range(60):
            if abs(val - target) < tol:
                return tb, sl
            tb2 = tb + (target - val) / sl
            val2 = theta_ret(tb2)
            if val2 != val:
                sl = (val2 - val) / (tb2 - tb)
            tb, val = tb2, val2
        raise RuntimeError("wrap targeting did not converge")

    # Theta mismatch against the stable curve, by direct fiber tracing
    def G(tb):
        exc, _ = F(tb)
        th_in = wrap_angle(exc.theta)
        stable = manifolds.collision_point_at("-", th_in, mu, section, s0, cfg)
        return exc.Theta - stable.Theta, exc, stable

    if wrap_stride is None:
        # space the reported orbits so consecutive maximal radii differ by
        # comfortably more than one unit: r ~ 1/eps and wraps are
        # (2 eps)^(5/2)/3 apart
        eps = best_d
        d_r = (2.0 * eps) ** 2.5 / (3.0 * eps * eps)
        wrap_stride = max(1, int(math.ceil(2.0 / max(d_r, 1e-9))))

    orbits = []
    base = exc0.theta
    tb_anchor, sl = tb0, slope
    for k in range(k_max):
        wrap = 1 + k * wrap_stride
        # land on the start of the wrap, then walk across it with the local
        # linear model; exact placement is irrelevant for bracketing
        tb_anchor, sl = seek(base - TWO_PI * wrap, tb_anchor, sl)
        fracs = np.linspace(-0.1, 1.15, n_probe)
        tbs = [tb_anchor + (-TWO_PI * f) / sl for f in fracs]
        gs = [G(tb)[0] for tb in tbs]
        root_tb = None
        for i in range(len(tbs) - 1):
            if (gs[i] < 0) != (gs[i + 1] < 0):
                a, b, ga, gb = tbs[i], tbs[i + 1], gs[i], gs[i + 1]
                gm = ga
                for _ in range(60):
                    m = a + (b - a) * 0.5
                    gm, _, _ = G(m)
                    if abs(gm) < residual_tol:
                        break
                    if (ga < 0) != (gm < 0):
                        b, gb = m, gm
                    else:
                        a, ga = m, gm
                root_tb = m
                break
        if root_tb is None:
            continue
        g, exc, stable = G(root_tb)
        orbits.append(
            EcoOrbit(
                mu,
                h,
                float(root_tb),
                float(stable.theta_bar),
                k + 1,
                exc.r_max,
                abs(g),
                float(F(root_tb)[1]),
                wrap_angle(exc.theta),
                exc.t_flight,
                exc.windings,
                exc.min_p2_distance,
            )
        )
    return orbits


def eco_trajectory(orbit: EcoOrbit, section: SectionSpec, config=None, s0: float = 1e-4):
    """Integrable handle: the three pieces of an ejection-collision orbit.

    Returns (ejection trajectory in the reduced chart, excursion result,
    capture trajectory in the reduced chart).
    """
    cfg = config or IntegratorConfig()
    mu, h = orbit.mu, orbit.h
    eject = flow.integrate(
        FieldId.REDUCED,
        (s0, orbit.theta_bar_plus, 0.5 * math.pi),
        (0.0, 100.0),
        mu,
        h,
        cfg,
        events=(
            EventSpec(
                lambda y: y[0] - section.delta,
                direction=+1,
                terminal=True,
                name="section",
                g_vec=lambda ys: ys[0] - section.delta,
            ),
        ),
    )
    hit = manifolds.trace_collision_manifold(
        FiberSeed("+", orbit.theta_bar_plus, s0), section, mu, cfg
    )
    exc = propagate_excursion(hit.theta, hit.Theta, mu, section, cfg)
    # forward continuation from the matched return point into collision
    r, th, R, Th = section.r_star, wrap_angle(exc.theta), exc.R, exc.Theta
    _, _, v, u = polar_to_collision_arrays(r, th, R, Th, mu)
    alpha = math.atan2(v, u)
    capture = flow.integrate_through_collision(
        (math.sqrt(r), th, alpha), mu, h, 2.0 * section.delta, cfg, tau_max=400.0
    )
    return eject, exc, capture


# ---------------------------------------------------------------------------
# triple intersection


def _map_point_through_collision(theta_lt, mu, section, config, s0=1e-4):
    """Continuous extension of the local map applied to p_< (on W^s(S-))."""
    stable = manifolds.collision_point_at("-", theta_lt, mu, section, s0, config)
    r, th, R, Th = section.r_star, stable.theta, stable.R, stable.Theta
    _, _, v, u = polar_to_collision_arrays(r, th, R, Th, mu)
    s = math.sqrt(r)
    alpha = math.atan2(v, u)
    _, _, z = localmap.straighten_minus(s, th, alpha, mu)
    s2, th2, al2 = localmap.unstraighten_plus(section.delta, 0.0, z, mu)
    rho = float(kernels.rho_energy(s2, th2, mu, section.h))
    p = math.sqrt(2.0 * (1.0 - mu) + rho)
    _, _, R2, Th2 = collision_to_polar_arrays(
        s2 * s2, th2, p * math.sin(al2), p * math.cos(al2), mu
    )
    return wrap_angle(th2), float(Th2), float(R2)


def find_triple_energy(
    mu: float,
    delta: float,
    config: IntegratorConfig | None = None,
    theta_plus0: float = 0.0,
    max_iter: int = 12,
    tol: float = 1e-10,
) -> TripleIntersectionResult:
    """Energy level at which the two manifold intersections share a fiber.

    Solves theta_>^u(theta+) = theta_>(theta+) by secant, where theta_> is
    the upper-branch intersection angle and theta_>^u the image of the
    lower-branch one under the (continuous extension of the) transition
    map.  Returns h* = -Theta_hat_0* and the transversality data at the
    triple point.
    """
    cfg = config or IntegratorConfig()
    budget = melnikov.QuadratureBudget(C=1000.0, exclusion=0.3)

    state = {}

    def gap(theta_plus):
        m_val = melnikov.melnikov_plus(theta_plus, budget).value
        h = mu * m_val
        theta_hat_0 = -h
        sec = SectionSpec(delta=delta, h=h)
        guess_gt = theta_plus - sec.w_sigma
        th_gt, slope_p, _ = manifolds.find_transverse_intersection(
            "+", mu, theta_hat_0, (guess_gt - 0.15, guess_gt + 0.15), sec, config=cfg
        )
        guess_lt = -theta_plus + sec.w_sigma
        th_lt, slope_m, _ = manifolds.find_transverse_intersection(
            "-", mu, theta_hat_0, (guess_lt - 0.15, guess_lt + 0.15), sec, config=cfg
        )
        th_mapped, _, _ = _map_point_through_collision(th_lt, mu, sec, cfg)
        state.update(
            h=h, sec=sec, th_gt=th_gt, th_lt=th_lt, th_mapped=th_mapped,
            slope_p=slope_p, slope_m=slope_m,
        )
        return math.remainder(th_mapped - th_gt, TWO_PI)

    a = theta_plus0
    fa = gap(a)
    b = a - math.copysign(min(0.05, abs(fa) * 2.0 + 1e-3), fa)
    fb = gap(b)
    for _ in range(max_iter):
        if abs(fb) < tol or fb == fa:
            break
        a, fa, b, fb = b, fb, b - fb * (b - a) / (fb - fa), None
        fb = gap(b)
    theta_plus = b
    sec = state["sec"]
    th_gt = state["th_gt"]

    # slopes of the three curves at theta_>
    step = 1e-4
    def inf_s_theta(th):
        return manifolds.trace_infinity_manifold_point(th, -state["h"], mu, sec, config=cfg).Theta

    def col_u_theta(th):
        return manifolds.collision_point_at("+", th, mu, sec, config=cfg).Theta

    slope_inf_s = (inf_s_theta(th_gt + step) - inf_s_theta(th_gt - step)) / (2 * step)
    slope_col_u = (col_u_theta(th_gt + step) - col_u_theta(th_gt - step)) / (2 * step)

    # image of the unstable infinity curve through the actual transit map,
    # differentiated at the triple point
    def inf_u_mapped(dth):
        th = state["th_lt"] + dth
        pt = manifolds.trace_infinity_manifold_point(th, -state["h"], mu, sec, stable=False, config=cfg)
        r, thp, R, Th = sec.r_star, pt.theta, pt.R, pt.Theta
        _, _, v, u = polar_to_collision_arrays(r, thp, R, Th, mu)
        s = math.sqrt(r)
        alpha = math.atan2(v, u)
        _, bt, z = localmap.straighten_minus(s, thp, alpha, mu)
        if bt <= 0.0:
            raise RuntimeError("point is not on the transiting side")
        res = localmap.transit(bt, z, mu, state["h"], sec.delta, cfg)
        s2, th2, al2 = localmap.unstraighten_plus(sec.delta, res.iota_out, res.w_out, mu)
        rho = float(kernels.rho_energy(s2, th2, mu, sec.h))
        p = math.sqrt(2.0 * (1.0 - mu) + rho)
        _, _, _, Th2 = collision_to_polar_arrays(
            s2 * s2, th2, p * math.sin(al2), p * math.cos(al2), mu
        )
        return wrap_angle(th2), float(Th2)

    # sample the mapped curve on the transiting side and fit its slope
    pts = []
    for sign_dir in (1.0, -1.0):
        for dth in (5e-5, 1e-4, 2e-4, 4e-4):
            try:
                pts.append(inf_u_mapped(sign_dir * dth))
            except RuntimeError:
                continue
        if len(pts) >= 3:
            break
    pts = np.array(sorted(pts))
    slope_inf_u_mapped = float(np.polyfit(pts[:, 0], pts[:, 1], 1)[0])

    def angle(sa, sb):
        # signed angle from the tangent (1, sb) to the tangent (1, sa)
        return math.asin(
            (sa - sb) / math.sqrt((1.0 + sa * sa) * (1.0 + sb * sb))
        )

    A = angle(slope_inf_s, slope_inf_u_mapped)
    B = angle(slope_col_u, slope_inf_u_mapped)
    d_plus_slope = state["slope_p"]
    # d- slope evaluated at theta_> (not at its own root)
    dm_p = manifolds.distance(th_gt + step, "-", mu, -state["h"], sec, config=cfg)
    dm_m = manifolds.distance(th_gt - step, "-", mu, -state["h"], sec, config=cfg)
    d_minus_slope = (dm_p - dm_m) / (2 * step)

    return TripleIntersectionResult(
        mu,
        delta,
        float(state["h"]),
        float(theta_plus),
        float(th_gt),
        float(state["th_lt"]),
        float(slope_inf_s),
        float(slope_col_u),
        slope_inf_u_mapped,
        float(A),
        float(B),
        float(d_plus_slope),
        float(d_minus_slope),
        melnikov.melnikov_plus(0.0, budget).value,
        float(abs(math.remainder(state["th_mapped"] - th_gt, TWO_PI))),
    )


# ---------------------------------------------------------------------------
# finite-horizon final-motion heuristic


def classify_final_motion(trajectory, horizon: float | None = None) -> str:
    """Finite-horizon heuristic Chazy classes: H, P, B, OS, COLLISION, UNDECIDED.

    Thresholds: COLLISION on a terminal collision event; H for r > 100
    leaving with radial speed > 0.1; P for r > 100 with radial speed < 0.02;
    B when r stays below 50 over the whole horizon; OS when r exceeded 50
    and re-entered r < 5 at least twice.
    """
    flags = getattr(trajectory, "flags", {})
    if flags.get("classification") == "collision" or flags.get("terminal_event") == "collision":
        return "COLLISION"
    y = trajectory.y
    if trajectory.field is FieldId.INFINITY:
        r = 2.0 / y[:, 0] ** 2
        rdot = y[:, 2]
    elif trajectory.field in (FieldId.POLAR_CM, FieldId.POLAR_P1):
        r = y[:, 0]
        rdot = y[:, 2]
    elif trajectory.field is FieldId.CARTESIAN:
        r = np.hypot(y[:, 0], y[:, 1])
        rdot = (y[:, 0] * y[:, 2] + y[:, 1] * y[:, 3]) / r
    else:
        raise ValueError("classifier needs a physical-time chart trajectory")
    r_end, rdot_end = float(r[-1]), float(rdot[-1])
    if r_end > 100.0 and rdot_end > 0.1 and r[-1] > r[-2]:
        return "H"
    if r_end > 100.0 and abs(rdot_end) < 0.02:
        return "P"
    if float(np.max(r)) < 50.0:
        return "B"
    above = r > 50.0
    below = r < 5.0
    if np.any(above):
        # count re-entries: falling below 5 after having been above 50
        reentries = 0
        armed = False
        for hi, lo in zip(above, below):
            if hi:
                armed = True
            elif lo and armed:
                reentries += 1
                armed = False
        if reentries >= 2:
            return "OS"
    return "UNDECIDED"
