"""Section traces of the collision and infinity manifolds, and their distance.

All curves live on the Poincare section r = delta^2 at a fixed energy h, as
graphs theta -> Theta in polar coordinates centered at the heavy primary.
The collision circles are seeded along their linear fibers at offset s0 and
integrated in the reduced chart; the infinity manifold is seeded at a large
radius from its first-order parameterization (angular momentum from the
truncated Melnikov-type integral, radial momentum from the energy
constraint) and integrated down to the section.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from . import flow, melnikov
from .backend import kernels
from .charts import collision_to_polar_arrays, hamiltonian_polar_p1, wrap_angle
from .constants import KAPPA, SQRT2, TWO_PI
from .fields import FieldId
from .flow import EventSpec, IntegratorConfig


@dataclass(frozen=True)
class SectionSpec:
    delta: float = 0.2
    h: float = 0.0
    branch: str = ">"  # sign of R on the section

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise ValueError("need 0 < delta < 1")
        if self.branch not in (">", "<"):
            raise ValueError("branch is '>' or '<'")

    @property
    def r_star(self) -> float:
        return self.delta**2

    @property
    def w_sigma(self) -> float:
        return (SQRT2 / 3.0) * self.delta**3


@dataclass(frozen=True)
class FiberSeed:
    circle: str  # "+" (ejection side) or "-" (collision side)
    theta_bar: float
    s0: float = 1e-4

    def __post_init__(self):
        if self.circle not in ("+", "-"):
            raise ValueError("circle is '+' or '-'")
        if not (0.0 < self.s0 <= 1e-2):
            raise ValueError("fiber offset s0 must be in (0, 1e-2]")


@dataclass
class SectionHit:
    theta: float  # section angle, wrapped to (-pi, pi]
    Theta: float
    R: float
    theta_bar: float
    seed_shift: float = 0.0
    flag: str = "ok"


@dataclass
class SectionCurve:
    source: str
    theta: np.ndarray
    Theta: np.ndarray
    R: np.ndarray
    theta_bar: np.ndarray
    periodic: bool = True
    dropped: list = None

    def __post_init__(self):
        order = np.argsort(self.theta)
        for name in ("theta", "Theta", "R", "theta_bar"):
            setattr(self, name, np.asarray(getattr(self, name))[order])
        if self.periodic:
            th = np.append(self.theta, self.theta[0] + TWO_PI)
            TH = np.append(self.Theta, self.Theta[0])
            tb = np.append(self.theta_bar, self.theta_bar[0])
            self._spline = CubicSpline(th, TH, bc_type="periodic")
            self._fiber = CubicSpline(th, np.unwrap(tb), bc_type="natural")
        else:
            self._spline = CubicSpline(self.theta, self.Theta)
            self._fiber = CubicSpline(self.theta, self.theta_bar)

    def __call__(self, theta):
        th = np.asarray(theta, dtype=float)
        if self.periodic:
            th = np.remainder(th - self.theta[0], TWO_PI) + self.theta[0]
        elif np.any(th < self.theta[0]) or np.any(th > self.theta[-1]):
            raise ValueError("angle outside the curve domain")
        return self._spline(th)

    def slope(self, theta):
        th = np.asarray(theta, dtype=float)
        if self.periodic:
            th = np.remainder(th - self.theta[0], TWO_PI) + self.theta[0]
        return self._spline(th, 1)

    def fiber_angle(self, theta):
        th = np.asarray(theta, dtype=float)
        if self.periodic:
            th = np.remainder(th - self.theta[0], TWO_PI) + self.theta[0]
        return self._fiber(th)

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("theta,Theta,R,flag\n")
            for th, TH, R in zip(self.theta, self.Theta, self.R):
                fh.write(f"{th:.17g},{TH:.17g},{R:.17g},ok\n")
            for th, reason in self.dropped or []:
                fh.write(f"{th:.17g},nan,nan,{reason}\n")


# ---------------------------------------------------------------------------
# collision-manifold traces


def _collision_section_raw(seed: FiberSeed, section: SectionSpec, mu: float, config):
    """One fiber trace to the section; returns (theta_unwrapped, Theta, R, tau)."""
    s_star = section.delta
    if seed.s0 >= s_star:
        raise ValueError("fiber offset must start inside the section radius")
    alpha0 = 0.5 * math.pi if seed.circle == "+" else -0.5 * math.pi
    sign = 1.0 if seed.circle == "+" else -1.0
    # unstable trace runs forward in tau, stable backward
    tau_end = sign * (2.2 * math.log(s_star / seed.s0) / math.sqrt(2.0 * (1.0 - mu)) + 20.0)
    ev = EventSpec(
        lambda y: y[0] - s_star,
        direction=+1,
        terminal=True,
        name="section",
        g_vec=lambda ys: ys[0] - s_star,
    )
    traj = flow.integrate(
        FieldId.REDUCED,
        (seed.s0, seed.theta_bar, alpha0),
        (0.0, tau_end),
        mu,
        section.h,
        config,
        events=(ev,),
    )
    if traj.flags.get("terminal_event") != "section":
        raise RuntimeError(
            f"fiber trace did not reach the section (flags {traj.flags})"
        )
    s, th, al = traj.y[-1]
    rho = float(kernels.rho_energy(s, th, mu, section.h))
    p = math.sqrt(2.0 * (1.0 - mu) + rho)
    _, _, R, Theta = collision_to_polar_arrays(
        s * s, th, p * math.sin(al), p * math.cos(al), mu
    )
    return float(th), float(Theta), float(R), float(traj.t[-1])


def trace_collision_manifold(
    seed: FiberSeed,
    section: SectionSpec,
    mu: float,
    config: IntegratorConfig | None = None,
    richardson: bool = True,
) -> SectionHit:
    """Section point of the unstable (S+) or stable (S-) fiber at theta_bar.

    One Richardson extrapolation in the seed offset removes the leading
    seeding error; the reported ``seed_shift`` is how far the point moved
    under halving s0 (it should be O(s0)).
    """
    cfg = config or IntegratorConfig()
    th1, Th1, R1, _ = _collision_section_raw(seed, section, mu, cfg)
    if not richardson:
        return SectionHit(wrap_angle(th1), Th1, R1, seed.theta_bar)
    half = FiberSeed(seed.circle, seed.theta_bar, 0.5 * seed.s0)
    th2, Th2, R2, _ = _collision_section_raw(half, section, mu, cfg)
    # align branches before extrapolating the angle
    th1 = th2 + (math.remainder(th1 - th2, TWO_PI))
    shift = max(abs(th2 - th1), abs(Th2 - Th1), abs(R2 - R1))
    return SectionHit(
        wrap_angle(2.0 * th2 - th1),
        2.0 * Th2 - Th1,
        2.0 * R2 - R1,
        seed.theta_bar,
        seed_shift=shift,
    )


def collision_curve(
    circle: str,
    mu: float,
    section: SectionSpec,
    n: int = 128,
    s0: float = 1e-4,
    config: IntegratorConfig | None = None,
) -> SectionCurve:
    """The full section trace of W^u(S+) (circle '+') or W^s(S-) ('-')."""
    thetas = np.linspace(-math.pi, math.pi, n, endpoint=False)
    hits = [
        trace_collision_manifold(FiberSeed(circle, float(tb), s0), section, mu, config)
        for tb in thetas
    ]
    return SectionCurve(
        f"W{'u' if circle == '+' else 's'}(S{circle})",
        np.array([h.theta for h in hits]),
        np.array([h.Theta for h in hits]),
        np.array([h.R for h in hits]),
        np.array([h.theta_bar for h in hits]),
        dropped=[],
    )


def collision_point_at(
    circle: str,
    theta: float,
    mu: float,
    section: SectionSpec,
    s0: float = 1e-4,
    config: IntegratorConfig | None = None,
) -> SectionHit:
    """Fiber trace whose section angle equals ``theta`` (secant in theta_bar)."""
    target = wrap_angle(theta)
    tb = target + (section.w_sigma if circle == "+" else -section.w_sigma)
    hit = trace_collision_manifold(FiberSeed(circle, float(tb), s0), section, mu, config)
    for _ in range(4):
        miss = math.remainder(target - hit.theta, TWO_PI)
        if abs(miss) < 1e-12:
            break
        tb += miss
        hit = trace_collision_manifold(FiberSeed(circle, float(tb), s0), section, mu, config)
    return hit


# ---------------------------------------------------------------------------
# infinity-manifold traces


def infinity_seed(
    theta0: float,
    Theta_hat_0: float,
    mu: float,
    h: float,
    w0: float,
    budget: melnikov.QuadratureBudget | None = None,
):
    """First-order seed state of W^s at parameter w0 (P1 polar chart).

    Theta from the truncated first-order integral of the parameterization,
    R > 0 from the energy constraint.
    """
    budget = budget or melnikov.QuadratureBudget(C=max(1000.0, 4.0 * w0))
    alpha0 = theta0 + w0
    r0 = KAPPA * w0 ** (2.0 / 3.0)
    quad_tail, _ = melnikov.gauss_kronrod_panels(
        lambda s: kernels.melnikov_f1(s, alpha0), w0, budget.C, budget
    )
    t_hi = w0 ** (1.0 / 3.0)
    quad_cos, _ = melnikov.gauss_kronrod_panels(
        lambda t: 3.0 * t * np.cos(alpha0 - t**3), 0.0, t_hi, budget
    )
    tail = (
        KAPPA * (quad_tail)
        + melnikov.SQRT_2_OVER_KAPPA * (melnikov.cos_integral_closed(alpha0) - quad_cos)
    )
    Theta = Theta_hat_0 + mu * tail
    R = solve_radial_momentum(r0, theta0, Theta, mu, h, positive=True)
    return np.array([r0, theta0, R, Theta])


def solve_radial_momentum(r, theta, Theta, mu, h, positive=True):
    """R from H(r, theta, R, Theta) = h; branch selected by ``positive``."""
    st = math.sin(theta)
    rest = hamiltonian_polar_p1(r, theta, 0.0, Theta, mu) - h
    disc = mu * mu * st * st - 2.0 * rest
    if disc < 0.0:
        raise ValueError("energy level not reachable at this (r, theta, Theta)")
    root = math.sqrt(disc)
    return -mu * st + root if positive else -mu * st - root


def _p2_distance_vec(ys):
    return np.sqrt(1.0 + ys[0] ** 2 - 2.0 * ys[0] * np.cos(ys[1]))


def trace_infinity_manifold_point(
    theta_target: float,
    Theta_hat_0: float,
    mu: float,
    section: SectionSpec,
    w0_rhat: float = 50.0,
    stable: bool = True,
    config: IntegratorConfig | None = None,
    secant_iters: int = 6,
):
    """Section point of W^s(Lambda) at the requested angle (stable side).

    The unstable-side point follows from the reversibility symmetry
    (theta, Theta, R) -> (-theta, Theta, -R).
    """
    if not stable:
        hit = trace_infinity_manifold_point(
            -theta_target, Theta_hat_0, mu, section, w0_rhat, True, config, secant_iters
        )
        return SectionHit(
            wrap_angle(-hit.theta), hit.Theta, -hit.R, -hit.theta_bar, hit.seed_shift, hit.flag
        )
    cfg = config or IntegratorConfig()
    w0 = (w0_rhat / KAPPA) ** 1.5
    h = section.h
    ev = EventSpec(
        lambda y: y[0] - section.r_star,
        direction=-1,
        terminal=True,
        name="section",
        g_vec=lambda ys: ys[0] - section.r_star,
    )
    theta0 = theta_target - w0 + section.w_sigma
    hit_th = hit_Th = hit_R = None
    flag = "ok"
    for _ in range(max(1, secant_iters)):
        y0 = infinity_seed(theta0, Theta_hat_0, mu, h, w0)
        traj = flow.integrate(
            FieldId.POLAR_P1, y0, (0.0, -4.0 * w0), mu, h, cfg, events=(ev,)
        )
        if traj.flags.get("terminal_event") != "section":
            raise RuntimeError("infinity trace did not reach the section")
        r, th, R, Th = traj.y[-1]
        d2min = float(np.min(_p2_distance_vec(traj.y.T)))
        if d2min < 0.05:
            flag = "close-encounter"
        hit_th, hit_Th, hit_R = float(th), float(Th), float(R)
        miss = math.remainder(theta_target - hit_th, TWO_PI)
        if abs(miss) < 1e-12:
            break
        theta0 += miss
    return SectionHit(wrap_angle(hit_th), hit_Th, hit_R, theta0 + w0, 0.0, flag)


def infinity_curve(
    Theta_hat_0: float,
    mu: float,
    section: SectionSpec,
    thetas=None,
    n: int = 128,
    w0_rhat: float = 50.0,
    stable: bool = True,
    config: IntegratorConfig | None = None,
    exclusion_width: float = 0.45,
) -> SectionCurve:
    """Sampled graph of the stable (or unstable) infinity-manifold trace.

    Angles inside the excluded window around -+(sqrt(2)/3 - w_Sigma) (where
    the unperturbed orbit meets P2) are skipped; samples whose trace passes
    within 0.05 of P2 are dropped and listed in ``curve.dropped``.
    """
    if thetas is None:
        thetas = np.linspace(-math.pi, math.pi, n, endpoint=False)
    # the trace from infinity meets P2 when theta + w_Sigma = sqrt(2)/3 on
    # the stable side (reflected for the unstable side)
    bad = melnikov.MELNIKOV_POLE_ANGLE - section.w_sigma
    center = bad if stable else -bad
    keep, dropped = [], []
    for th in thetas:
        if melnikov.circular_distance(float(th), center) < exclusion_width:
            dropped.append((float(th), "excluded-window"))
            continue
        keep.append(float(th))
    hits = []
    for th in keep:
        hit = trace_infinity_manifold_point(
            th, Theta_hat_0, mu, section, w0_rhat, stable, config, secant_iters=1
        )
        if hit.flag == "close-encounter":
            dropped.append((th, "close-encounter"))
        else:
            hits.append(hit)
    return SectionCurve(
        "Ws(inf)" if stable else "Wu(inf)",
        np.array([h.theta for h in hits]),
        np.array([h.Theta for h in hits]),
        np.array([h.R for h in hits]),
        np.array([h.theta_bar for h in hits]),
        periodic=False,
        dropped=dropped,
    )


def check_w0_convergence(
    theta: float,
    Theta_hat_0: float,
    mu: float,
    section: SectionSpec,
    w0_rhat: float = 50.0,
) -> float:
    """Change of the section Theta under doubling of the seeding radius."""
    a = trace_infinity_manifold_point(theta, Theta_hat_0, mu, section, w0_rhat)
    b = trace_infinity_manifold_point(theta, Theta_hat_0, mu, section, 2.0 * w0_rhat)
    return abs(b.Theta - a.Theta)


# ---------------------------------------------------------------------------
# distance functions and intersections


def distance(
    theta: float,
    which: str,
    mu: float,
    Theta_hat_0: float,
    section: SectionSpec,
    w0_rhat: float = 50.0,
    s0: float = 1e-4,
    config: IntegratorConfig | None = None,
) -> float:
    """d+ (which='+') or d- ('-') at a section angle, by direct traces.

    d+(theta) = Theta_inf_s(theta) - Theta_Splus_u(theta) on the R > 0
    branch; d- mirrors it on R < 0.
    """
    if which == "+":
        inf_hit = trace_infinity_manifold_point(
            theta, Theta_hat_0, mu, section, w0_rhat, stable=True, config=config
        )
        col_hit = collision_point_at("+", theta, mu, section, s0, config)
    elif which == "-":
        inf_hit = trace_infinity_manifold_point(
            theta, Theta_hat_0, mu, section, w0_rhat, stable=False, config=config
        )
        col_hit = collision_point_at("-", theta, mu, section, s0, config)
    else:
        raise ValueError("which is '+' or '-'")
    return inf_hit.Theta - col_hit.Theta


def find_transverse_intersection(
    which: str,
    mu: float,
    Theta_hat_0: float,
    bracket,
    section: SectionSpec,
    tol: float = 1e-12,
    slope_step: float = 1e-4,
    noise_floor: float = 1e-10,
    **kw,
):
    """Root of the distance function on a bracket, with its local slope.

    Returns (theta_root, slope, transversal) where transversal requires the
    slope to clear 10x the numerical noise floor.  Raises if the distance
    does not change sign on the bracket.
    """
    a, b = float(bracket[0]), float(bracket[1])
    fa = distance(a, which, mu, Theta_hat_0, section, **kw)
    fb = distance(b, which, mu, Theta_hat_0, section, **kw)
    if fa * fb > 0.0:
        raise ValueError(f"distance does not change sign on [{a}, {b}]")
    # bisection to a small bracket, then secant polish
    while abs(b - a) > 1e-3:
        m = 0.5 * (a + b)
        fm = distance(m, which, mu, Theta_hat_0, section, **kw)
        if fa * fm <= 0.0:
            b, fb = m, fm
        else:
            a, fa = m, fm
    root = 0.5 * (a + b)
    froot = distance(root, which, mu, Theta_hat_0, section, **kw)
    prev, fprev = a, fa
    for _ in range(20):
        if froot == fprev:
            break
        step = froot * (root - prev) / (froot - fprev)
        prev, fprev = root, froot
        root = root - step
        froot = distance(root, which, mu, Theta_hat_0, section, **kw)
        if abs(froot) < tol:
            break
    fp = distance(root + slope_step, which, mu, Theta_hat_0, section, **kw)
    fm = distance(root - slope_step, which, mu, Theta_hat_0, section, **kw)
    slope = (fp - fm) / (2.0 * slope_step)
    return root, slope, abs(slope) > 10.0 * noise_floor
