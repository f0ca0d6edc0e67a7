"""Error-budgeted evaluation of the Melnikov integrals.

Every value comes with an explicit a posteriori error budget: the
quadrature error estimate of the adaptive Gauss-Kronrod rule on the core
interval [c, C] plus analytic bounds for the truncated inner and outer
tails.  Arithmetic is plain floating point; enclosures are
[value - err, value + err].

The principal function is

  M+(alpha) = kappa * int_0^inf s^(2/3) sin(alpha - s) / D(s, alpha)^(3/2) ds
            + sqrt(2/kappa) * int_0^inf cos(alpha - s) / s^(1/3) ds,

with D = 1 + kappa^2 s^(4/3) - 2 kappa s^(2/3) cos(alpha - s).  The second
(conditionally convergent) integral has the closed form
sqrt(2/kappa) Gamma(2/3) (cos(alpha)/2 + sqrt(3)/2 sin(alpha)); its
derivative counterpart I2 likewise.  The denominator D vanishes only at
s = sqrt(2)/3 with alpha = s mod 2pi, so an angular window around
sqrt(2)/3 is excluded from the admissible domain.

The derivative dM+/dtheta = I1 - I2 uses the splitting
i(0,c) + i(c,C) + i(C,inf) with the uniform tail bounds

  |i(0,c)|    <= (3/5) c^(5/3) / (1-kappa c^(2/3))^3
                 + (9 kappa/7) c^(7/3) / (1-kappa c^(2/3))^5,
  |i(C,inf)|  <= 3 / (C^(1/3) (kappa - C^(-2/3))^3)
                 + 3 kappa / (C (kappa - C^(-2/3))^5),

valid for c < kappa^(-3/2) < C.  For the value integral the outer tail is
bounded more sharply by splitting off the oscillatory leading term
kappa^(-3) s^(-4/3) sin(alpha - s), whose tail integral is bounded by
integration by parts; the expansion remainder is integrable.  All tail
bounds are exercised against brute-force quadrature in the test suite.
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .constants import GAMMA_TWO_THIRDS, KAPPA, MELNIKOV_POLE_ANGLE, TWO_PI

SQRT_2_OVER_KAPPA = math.sqrt(2.0 / KAPPA)

# theta+ windows on which the derivative sign is certified (three arcs)
B_PLUS = (
    (-1.72851, -0.583065),
    (-0.407155, 0.0578054),
    (0.921743, 4.15633),
)


class MelnikovDomainError(ValueError):
    """Angle falls in the excluded window where the integrand may blow up."""


@dataclass(frozen=True)
class QuadratureBudget:
    c: float = 0.001
    C: float = 100.0
    panel_max: float = math.pi / 4.0
    panel_target: float = 1e-11
    exclusion: float = 0.45
    max_depth: int = 24

    def __post_init__(self):
        if not (0.0 < self.c < KAPPA ** -1.5 < self.C):
            raise ValueError("need 0 < c < kappa^(-3/2) < C")


DEFAULT_BUDGET = QuadratureBudget()


@dataclass(frozen=True)
class MelnikovEval:
    theta: float
    value: float
    err: float

    @property
    def lo(self) -> float:
        return self.value - self.err

    @property
    def hi(self) -> float:
        return self.value + self.err


def circular_distance(a: float, b: float) -> float:
    d = math.fmod(a - b, TWO_PI)
    if d < -math.pi:
        d += TWO_PI
    elif d > math.pi:
        d -= TWO_PI
    return abs(d)


def is_admissible(theta: float, window: float) -> bool:
    return circular_distance(theta, MELNIKOV_POLE_ANGLE) >= window


def _require_admissible(theta: float, window: float):
    if not is_admissible(theta, window):
        raise MelnikovDomainError(
            f"theta={theta} within {window} of the pole angle sqrt(2)/3"
        )


# ---------------------------------------------------------------------------
# adaptive Gauss-Kronrod on panels (vectorized over panels)

_XGK = np.array(
    [
        -0.9914553711208126,
        -0.9491079123427585,
        -0.8648644233597691,
        -0.7415311855993944,
        -0.5860872354676911,
        -0.4058451513773972,
        -0.2077849550078985,
        0.0,
        0.2077849550078985,
        0.4058451513773972,
        0.5860872354676911,
        0.7415311855993944,
        0.8648644233597691,
        0.9491079123427585,
        0.9914553711208126,
    ]
)
_WGK = np.array(
    [
        0.02293532201052922,
        0.06309209262997855,
        0.1047900103222502,
        0.1406532597155259,
        0.1690047266392679,
        0.1903505780647854,
        0.2044329400752989,
        0.2094821410847278,
        0.2044329400752989,
        0.1903505780647854,
        0.1690047266392679,
        0.1406532597155259,
        0.1047900103222502,
        0.06309209262997855,
        0.02293532201052922,
    ]
)
_WG = np.array(
    [
        0.1294849661688697,
        0.2797053914892767,
        0.3818300505051189,
        0.4179591836734694,
        0.3818300505051189,
        0.2797053914892767,
        0.1294849661688697,
    ]
)
_GAUSS_IDX = np.arange(1, 15, 2)


def gauss_kronrod_panels(fvec, a: float, b: float, budget: QuadratureBudget):
    """Integrate fvec (vectorized) over [a, b] with panel-wise GK15.

    Panels no longer than ``panel_max`` (the oscillation scale of the
    integrands here); panels whose |K15 - G7| exceeds ``panel_target`` are
    bisected.  Returns (value, error_estimate) where the estimate is the
    sum of |K15 - G7| over the final panels.
    """
    if b <= a:
        return 0.0, 0.0
    n0 = max(1, int(math.ceil((b - a) / budget.panel_max)))
    edges = np.linspace(a, b, n0 + 1)
    lefts, rights = edges[:-1], edges[1:]
    total_v = 0.0
    total_e = 0.0
    for _ in range(budget.max_depth):
        mid = 0.5 * (lefts + rights)
        half = 0.5 * (rights - lefts)
        nodes = (mid[:, None] + half[:, None] * _XGK[None, :]).ravel()
        vals = np.asarray(fvec(nodes)).reshape(len(lefts), 15)
        k15 = (vals * _WGK[None, :]).sum(axis=1) * half
        g7 = (vals[:, _GAUSS_IDX] * _WG[None, :]).sum(axis=1) * half
        err = np.abs(k15 - g7)
        good = err <= budget.panel_target
        total_v += float(k15[good].sum())
        total_e += float(err[good].sum())
        if np.all(good):
            return total_v, total_e
        bl, br = lefts[~good], rights[~good]
        bm = 0.5 * (bl + br)
        lefts = np.concatenate([bl, bm])
        rights = np.concatenate([bm, br])
    # depth exhausted: accept what is left at its estimated error
    mid = 0.5 * (lefts + rights)
    half = 0.5 * (rights - lefts)
    nodes = (mid[:, None] + half[:, None] * _XGK[None, :]).ravel()
    vals = np.asarray(fvec(nodes)).reshape(len(lefts), 15)
    k15 = (vals * _WGK[None, :]).sum(axis=1) * half
    g7 = (vals[:, _GAUSS_IDX] * _WG[None, :]).sum(axis=1) * half
    return total_v + float(k15.sum()), total_e + float(np.abs(k15 - g7).sum())


# ---------------------------------------------------------------------------
# analytic tail bounds


def inner_tail_i1(c: float) -> float:
    """|i(0, c)| bound for the derivative integrand (before the kappa factor)."""
    m = 1.0 - KAPPA * c ** (2.0 / 3.0)
    return 0.6 * c ** (5.0 / 3.0) / m**3 + (9.0 * KAPPA / 7.0) * c ** (7.0 / 3.0) / m**5


def outer_tail_i1(C: float) -> float:
    """|i(C, inf)| bound for the derivative integrand (before the kappa factor)."""
    m = KAPPA - C ** (-2.0 / 3.0)
    return 3.0 / (C ** (1.0 / 3.0) * m**3) + 3.0 * KAPPA / (C * m**5)


def inner_tail_f1(c: float) -> float:
    """Inner tail bound for the value integrand (before the kappa factor)."""
    m = 1.0 - KAPPA * c ** (2.0 / 3.0)
    return 0.6 * c ** (5.0 / 3.0) / m**3


def outer_tail_f1(C: float) -> float:
    """Sharp outer tail bound for the value integrand (before the kappa factor).

    Splits off the leading oscillatory term kappa^(-3) s^(-4/3) sin(alpha-s)
    (tail bounded by parts) and bounds the expansion remainder.
    """
    ebar = 2.0 / (KAPPA * C ** (2.0 / 3.0)) + 1.0 / (KAPPA**2 * C ** (4.0 / 3.0))
    if ebar >= 1.0:
        raise ValueError("C too small for the sharp outer bound")
    lead = 2.0 * C ** (-4.0 / 3.0)
    rem = 1.5 * (1.0 - ebar) ** -2.5 * (
        2.0 / (KAPPA * C) + 0.6 / (KAPPA**2 * C ** (5.0 / 3.0))
    )
    return (lead + rem) / KAPPA**3


def inner_tail_envelope(c: float) -> float:
    m = 1.0 - KAPPA * c ** (2.0 / 3.0)
    return (
        0.6 * c ** (5.0 / 3.0) / m**3
        + (27.0 * KAPPA / 7.0) * c ** (7.0 / 3.0) / m**5
        + 5.0 * KAPPA**2 * c**3 / m**7
    )


def outer_tail_envelope(C: float) -> float:
    m = KAPPA - C ** (-2.0 / 3.0)
    return (
        3.0 / (C ** (1.0 / 3.0) * m**3)
        + 9.0 * KAPPA / (C * m**5)
        + 9.0 * KAPPA**2 / (C ** (5.0 / 3.0) * m**7)
    )


# ---------------------------------------------------------------------------
# closed forms of the oscillatory pieces


def cos_integral_closed(alpha: float) -> float:
    """int_0^inf cos(alpha - s) s^(-1/3) ds = Gamma(2/3)(cos a / 2 + sqrt3/2 sin a)."""
    return GAMMA_TWO_THIRDS * (0.5 * math.cos(alpha) + 0.5 * math.sqrt(3.0) * math.sin(alpha))


def i2_closed(theta: float) -> float:
    """I2(theta) = sqrt(2/kappa) Gamma(2/3) (sin(theta)/2 - sqrt(3)/2 cos(theta))."""
    return SQRT_2_OVER_KAPPA * GAMMA_TWO_THIRDS * (
        0.5 * math.sin(theta) - 0.5 * math.sqrt(3.0) * math.cos(theta)
    )


# ---------------------------------------------------------------------------
# main evaluations


def melnikov_plus(theta: float, budget: QuadratureBudget = DEFAULT_BUDGET) -> MelnikovEval:
    """M+(theta) with its error budget."""
    _require_admissible(theta, budget.exclusion)
    quad, qerr = gauss_kronrod_panels(
        lambda s: kernels.melnikov_f1(s, theta), budget.c, budget.C, budget
    )
    value = KAPPA * quad + SQRT_2_OVER_KAPPA * cos_integral_closed(theta)
    err = KAPPA * (inner_tail_f1(budget.c) + outer_tail_f1(budget.C) + qerr)
    return MelnikovEval(theta, value, err)


def melnikov_minus(theta: float, budget: QuadratureBudget = DEFAULT_BUDGET) -> MelnikovEval:
    """M-(theta) = -M+(-theta), the reflected branch (shared code path)."""
    ev = melnikov_plus(-theta, budget)
    return MelnikovEval(theta, -ev.value, ev.err)


def melnikov_plus_derivative(
    theta: float, budget: QuadratureBudget = DEFAULT_BUDGET
) -> MelnikovEval:
    """dM+/dtheta = I1(theta) - I2(theta), I2 in closed form."""
    _require_admissible(theta, budget.exclusion)
    quad, qerr = kernels.quad_cert(
        0, theta, 0.0, budget.c, budget.C,
        budget.panel_max, budget.panel_target, budget.max_depth,
    )
    value = KAPPA * quad - i2_closed(theta)
    err = KAPPA * (inner_tail_i1(budget.c) + outer_tail_i1(budget.C) + qerr)
    return MelnikovEval(theta, value, err)


def half_integrals(
    theta: float, r_star: float, budget: QuadratureBudget = DEFAULT_BUDGET
):
    """The two half-Melnikov integrals at the section radius r* = delta^2.

    Returns (I_Splus_u, I_inf_s) as MelnikovEvals in the section angle
    theta; both are evaluated at the shifted argument alpha = theta + w_Sigma
    with w_Sigma = (sqrt 2 / 3) delta^3.  They satisfy
    M+(theta + w_Sigma) = -(I_Splus_u + I_inf_s).
    """
    delta = math.sqrt(r_star)
    w_sig = (math.sqrt(2.0) / 3.0) * delta**3
    alpha = theta + w_sig
    _require_admissible(alpha, budget.exclusion)

    # finite pieces on [0, w_Sigma]; substitution s = t^3 regularizes s^(-1/3)
    quad_f1, e1 = gauss_kronrod_panels(
        lambda s: kernels.melnikov_f1(s, alpha), 0.0, w_sig, budget
    )
    t_hi = w_sig ** (1.0 / 3.0)
    quad_cos, e2 = gauss_kronrod_panels(
        lambda t: 3.0 * t * np.cos(alpha - t**3), 0.0, t_hi, budget
    )
    i_splus = -KAPPA * quad_f1 - SQRT_2_OVER_KAPPA * quad_cos
    err_splus = KAPPA * e1 + SQRT_2_OVER_KAPPA * e2

    # stable-manifold side: quadrature on [w_Sigma, C] plus sharp outer tail,
    # oscillatory piece via the closed form minus the finite [0, w_Sigma] part
    quad_tail, e3 = gauss_kronrod_panels(
        lambda s: kernels.melnikov_f1(s, alpha), w_sig, budget.C, budget
    )
    i_inf = (
        -KAPPA * quad_tail
        - SQRT_2_OVER_KAPPA * (cos_integral_closed(alpha) - quad_cos)
    )
    err_inf = KAPPA * (e3 + outer_tail_f1(budget.C)) + SQRT_2_OVER_KAPPA * e2
    return MelnikovEval(theta, i_splus, err_splus), MelnikovEval(theta, i_inf, err_inf)


# ---------------------------------------------------------------------------
# derivative sign certification


def _phi_interval_bounds(s_nodes, theta_lo, theta_hi):
    """max cos(phi) and max |sin(phi)| for phi = theta - s, theta in [lo, hi]."""
    a = theta_lo - s_nodes
    b = theta_hi - s_nodes
    ca, cb = np.cos(a), np.cos(b)
    sa, sb = np.sin(a), np.sin(b)
    # does [a, b] contain a multiple of 2 pi (cos max = 1)?
    ka = np.ceil(a / TWO_PI)
    has_cos_max = ka * TWO_PI <= b
    cmax = np.where(has_cos_max, 1.0, np.maximum(ca, cb))
    # does [a, b] contain pi/2 + k pi (|sin| max = 1)?
    ks = np.ceil((a - 0.5 * math.pi) / math.pi)
    has_sin_max = 0.5 * math.pi + ks * math.pi <= b
    smax = np.where(has_sin_max, 1.0, np.maximum(np.abs(sa), np.abs(sb)))
    return cmax, smax


def derivative_lipschitz_bound(
    theta_lo: float, theta_hi: float, budget: QuadratureBudget = DEFAULT_BUDGET
) -> float:
    """Upper bound for |d^2 M+ / dtheta^2| over [theta_lo, theta_hi]."""

    # the envelope has kinks where the per-panel trig extrema switch branch;
    # a loose panel target avoids deep subdivision there, and the quadrature
    # error is added on top so the result stays an upper bound
    env_target = max(budget.panel_target, 1e-6)
    quad, qerr = kernels.quad_cert(
        1, theta_lo, theta_hi, budget.c, budget.C,
        budget.panel_max, env_target, budget.max_depth,
    )
    i1_part = KAPPA * (quad + qerr + inner_tail_envelope(budget.c) + outer_tail_envelope(budget.C))
    i2_part = SQRT_2_OVER_KAPPA * GAMMA_TWO_THIRDS
    return i1_part + i2_part


def _certify_chunk(args):
    los, his, budget = args
    out = []
    for lo, hi in zip(los, his):
        mid = 0.5 * (lo + hi)
        ev = melnikov_plus_derivative(mid, budget)
        slack = derivative_lipschitz_bound(lo, hi, budget) * 0.5 * (hi - lo)
        margin = abs(ev.value) - ev.err - slack
        out.append((lo, hi, ev.value, ev.err, slack, margin))
    return out


def certify_sign_on_b_plus(
    grid_n: int = 10000,
    budget: QuadratureBudget = None,
    intervals=B_PLUS,
    threads: int = 1,
) -> dict:
    """Certify that dM+/dtheta does not vanish on the given angular arcs.

    Splits the arcs into ``grid_n`` subintervals (allocated proportionally
    to arc length), evaluates the derivative with its budget at each
    midpoint, and adds a Lipschitz slack: a computed bound on the second
    derivative over the subinterval times its half-width.  A subinterval is
    certified when |value| exceeds budget + slack.

    Returns a report dict; ``report["certified"]`` is the global verdict and
    ``report["uncertified"]`` lists failing subintervals.
    """
    if grid_n < 1:
        raise ValueError("grid_n >= 1")
    # The arc endpoints sit where |dM+/dtheta| ~ 0.26, below the outer tail
    # bound at C = 100 (0.266); certification needs the longer core interval.
    # The exclusion window 0.3 keeps all three arcs admissible.
    budget = budget or QuadratureBudget(C=1000.0, exclusion=0.3)
    lengths = [hi - lo for lo, hi in intervals]
    total = sum(lengths)
    counts = [max(1, int(round(grid_n * ln / total))) for ln in lengths]
    # keep the requested total
    while sum(counts) > grid_n:
        counts[counts.index(max(counts))] -= 1
    while sum(counts) < grid_n:
        counts[counts.index(max(counts))] += 1

    los, his = [], []
    for (lo, hi), n in zip(intervals, counts):
        edges = np.linspace(lo, hi, n + 1)
        los.append(edges[:-1])
        his.append(edges[1:])
    los = np.concatenate(los)
    his = np.concatenate(his)

    nw = max(1, threads)
    chunks = [
        (los[i::nw], his[i::nw], budget) for i in range(nw)
    ]
    if nw == 1:
        results = [_certify_chunk(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            results = list(ex.map(_certify_chunk, chunks))
    # reassemble in grid order regardless of the thread layout
    rows = [None] * len(los)
    for w, chunk in enumerate(results):
        for j, row in enumerate(chunk):
            rows[w + j * nw] = row

    vals = np.array([r[2] for r in rows])
    margins = np.array([r[5] for r in rows])
    uncertified = [
        {"lo": r[0], "hi": r[1], "value": r[2], "err": r[3], "slack": r[4]}
        for r in rows
        if r[5] <= 0.0
    ]
    d0 = melnikov_plus_derivative(0.0, budget)
    report = {
        "grid_n": int(grid_n),
        "intervals": [list(iv) for iv in intervals],
        "certified": not uncertified,
        "uncertified": uncertified,
        "worst_margin": float(margins.min()),
        "sign_changes": bool(np.any(vals > 0) and np.any(vals < 0)),
        "derivative_at_zero": {"value": d0.value, "err": d0.err},
        "derivative_at_zero_negative": bool(d0.hi < 0.0),
        "budget": {"c": budget.c, "C": budget.C, "exclusion": budget.exclusion},
    }
    return report


def certification_to_json(report: dict, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# oscillatory quadrature oracle for I2 (used to validate the closed form)


def i2_quadrature_oracle(theta: float, s_max: float = 2000.0 * math.pi) -> float:
    """I2 by partial-period summation with one Euler averaging.

    Integrates sin(theta - s) s^(-1/3) over successive half-periods (the
    sign-constant pieces), then averages consecutive partial sums; the
    alternating tail makes the averaged sequence converge like the term
    differences.
    """
    budget = QuadratureBudget(panel_max=math.pi / 2.0)
    # first zero of sin(theta - s) at s >= tiny start
    start = 1e-8
    k0 = math.ceil((theta - start) / math.pi)
    cuts = [start]
    k = k0
    while True:
        z = theta - k * math.pi
        if z <= start:
            break
        cuts.append(z)
        k += 1
    cuts = sorted(set(cuts))
    z = cuts[-1] + math.pi
    while z < s_max:
        cuts.append(z)
        z += math.pi
    cuts.append(s_max)

    terms = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        # substitution s = t^3 near zero keeps the endpoint integrable
        if a < 1e-3:
            v, _ = gauss_kronrod_panels(
                lambda t: 3.0 * t * np.sin(theta - t**3),
                a ** (1.0 / 3.0) if a > 0 else 0.0,
                b ** (1.0 / 3.0),
                budget,
            )
        else:
            v, _ = gauss_kronrod_panels(
                lambda s: np.sin(theta - s) / np.cbrt(s), a, b, budget
            )
        terms.append(v)
    partial = np.cumsum(terms)
    averaged = 0.5 * (partial[:-1] + partial[1:])
    return SQRT_2_OVER_KAPPA * float(averaged[-1])


# ---------------------------------------------------------------------------
# scans


def scan(thetas, budget: QuadratureBudget = DEFAULT_BUDGET, kind: str = "value", threads: int = 1):
    """Evaluate M+ (kind='value') or dM+/dtheta (kind='derivative') on a grid.

    Inadmissible angles yield NaN rows.  Returns (thetas, values, errs).
    """
    fn = melnikov_plus if kind == "value" else melnikov_plus_derivative
    thetas = np.asarray(thetas, dtype=float)

    def one(th):
        try:
            ev = fn(float(th), budget)
            return ev.value, ev.err
        except MelnikovDomainError:
            return math.nan, math.nan

    nw = max(1, threads)
    if nw == 1:
        rows = [one(th) for th in thetas]
    else:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            rows = list(ex.map(one, thetas))
    vals = np.array([r[0] for r in rows])
    errs = np.array([r[1] for r in rows])
    return thetas, vals, errs
