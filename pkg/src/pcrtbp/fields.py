"""Right-hand sides of all the differential systems, plus first integrals.

The regularized family (REGULARIZED, REDUCED, COLLISION_TORUS and the
straightened oracles) runs in the rescaled time tau with dt = r^(3/2) dtau;
everything else runs in the synodic time t.

The reduced alpha' equation is implemented in the form obtained by
differentiating alpha = atan2(v, u) along the regularized field, which is
regular where sin(alpha) = 0 and coincides with the printed form on the
energy manifold.
"""

import enum
import math

import numpy as np

from .backend import kernels
from . import charts


class FieldId(enum.Enum):
    CARTESIAN = "cartesian"
    POLAR_CM = "polar_cm"
    POLAR_P1 = "polar_p1"
    INFINITY = "infinity"
    REGULARIZED = "regularized"
    REDUCED = "reduced"
    COLLISION_TORUS = "collision_torus"
    STRAIGHTENED_MINUS = "straightened_minus"
    STRAIGHTENED_PLUS = "straightened_plus"


# time variable per field: 't' is synodic time, 'tau' the regularized time
TIME_VAR = {
    FieldId.CARTESIAN: "t",
    FieldId.POLAR_CM: "t",
    FieldId.POLAR_P1: "t",
    FieldId.INFINITY: "t",
    FieldId.REGULARIZED: "tau",
    FieldId.REDUCED: "tau",
    FieldId.COLLISION_TORUS: "tau",
    FieldId.STRAIGHTENED_MINUS: "tau",
    FieldId.STRAIGHTENED_PLUS: "tau",
}

DIMENSION = {
    FieldId.CARTESIAN: 4,
    FieldId.POLAR_CM: 4,
    FieldId.POLAR_P1: 4,
    FieldId.INFINITY: 4,
    FieldId.REGULARIZED: 4,
    FieldId.REDUCED: 3,
    FieldId.COLLISION_TORUS: 2,
    FieldId.STRAIGHTENED_MINUS: 3,
    FieldId.STRAIGHTENED_PLUS: 3,
}

_NEEDS_H = {FieldId.REDUCED, FieldId.STRAIGHTENED_MINUS, FieldId.STRAIGHTENED_PLUS}


def m0(mu: float) -> float:
    return math.sqrt(2.0 * (1.0 - mu))


def lambda_coefficient(mu: float, h: float) -> float:
    """lambda(mu, h) = (mu^2 + 2h + 2mu) / (4 m0), the slow drift rate near collision."""
    return (mu * mu + 2.0 * h + 2.0 * mu) / (4.0 * m0(mu))


def rhs(field: FieldId, mu: float, h: float | None = None):
    """Return fun(t, y) -> list for the requested field."""
    if field in _NEEDS_H:
        if h is None:
            raise ValueError(f"{field.name} needs the energy level h")
        hh = float(h)
    k = kernels
    if field is FieldId.CARTESIAN:
        return lambda t, y: k.rhs_cartesian(t, y, mu)
    if field is FieldId.POLAR_CM:
        return lambda t, y: k.rhs_polar_cm(t, y, mu)
    if field is FieldId.POLAR_P1:
        return lambda t, y: k.rhs_polar_p1(t, y, mu)
    if field is FieldId.INFINITY:
        return lambda t, y: k.rhs_infinity(t, y, mu)
    if field is FieldId.REGULARIZED:
        return lambda t, y: k.rhs_regularized(t, y, mu)
    if field is FieldId.REDUCED:
        return lambda t, y: k.rhs_reduced(t, y, mu, hh)
    if field is FieldId.COLLISION_TORUS:
        return lambda t, y: k.rhs_collision_torus(t, y, mu)
    if field is FieldId.STRAIGHTENED_MINUS:
        return lambda t, y: k.rhs_straightened_minus(t, y, mu, hh)
    if field is FieldId.STRAIGHTENED_PLUS:
        return lambda t, y: k.rhs_straightened_plus(t, y, mu, hh)
    raise ValueError(field)


def eval_field(field: FieldId, state, mu: float, h: float | None = None) -> np.ndarray:
    y = np.asarray(state, dtype=float)
    if field is FieldId.REDUCED and y[0] < 0.0:
        raise ValueError("reduced chart needs s >= 0")
    return np.asarray(rhs(field, mu, h)(0.0, y), dtype=float)


class FirstIntegral(enum.Enum):
    H_HAT = "h_hat"      # Hamiltonian in the infinity chart, regular at xi = 0
    M_TILDE = "m_tilde"  # r * (H - h) in the collision chart, regular at r = 0
    M = "m"              # energy relation of the reduced chart


def m_tilde(r, theta, v, u, mu, h):
    base = -r * h + 0.5 * (v * v + u * u) - 0.5 * r**3 - (1.0 - mu)
    if mu == 0.0:
        return base
    W = 1.0 + r * r - 2.0 * r * np.cos(theta)
    return base + mu * r * (-0.5 * mu + r * np.cos(theta) - 1.0 / np.sqrt(W))


def eval_integral(which: FirstIntegral, state, mu: float, h: float) -> float:
    y = np.asarray(state, dtype=float)
    if which is FirstIntegral.H_HAT:
        return float(charts.hamiltonian_infinity(*y, mu))
    if which is FirstIntegral.M_TILDE:
        return float(m_tilde(*y, mu, h))
    if which is FirstIntegral.M:
        s, theta, alpha = y[:3]
        rho = y[3] if y.size > 3 else kernels.rho_energy(s, theta, mu, h)
        return float(kernels.rho_energy(s, theta, mu, h) - rho)
    raise ValueError(which)


# ---------------------------------------------------------------------------
# cross-chart consistency

# state-vector transform A -> B, plus the time factor dt_B/dt_A as a function
# of the A-state, so that F_B = J . F_A / factor.


def _p1_from_cm(y, mu):
    return np.asarray(charts.cm_polar_to_p1_polar_arrays(*y, mu))


def _cm_from_p1(y, mu):
    return np.asarray(charts.p1_polar_to_cm_polar_arrays(*y, mu))


def _cart_from_polar_cm(y, mu):
    return np.asarray(charts.polar_to_cart_arrays(*y, mu, charts.CM))


def _cart_from_polar_p1(y, mu):
    return np.asarray(charts.polar_to_cart_arrays(*y, mu, charts.P1))


def _inf_from_cm(y, mu):
    r, th, R, Th = y
    return np.asarray([math.sqrt(2.0 / r), th, R, Th])


def _polar_from_reg(y, mu):
    return np.asarray(charts.collision_to_polar_arrays(*y, mu))


def _reg_from_reduced(y, mu, h):
    s, th, al = y
    rho = float(kernels.rho_energy(s, th, mu, h))
    p = math.sqrt(2.0 * (1.0 - mu) + rho)
    return np.asarray([s * s, th, p * math.sin(al), p * math.cos(al)])


def _transform(id_a: FieldId, id_b: FieldId, mu: float, h: float | None):
    """(map A-state -> B-state, dt_b/dt_a as function of the A-state)."""
    F = FieldId
    one = lambda y: 1.0
    table = {
        (F.POLAR_CM, F.CARTESIAN): (lambda y: _cart_from_polar_cm(y, mu), one),
        (F.POLAR_P1, F.CARTESIAN): (lambda y: _cart_from_polar_p1(y, mu), one),
        (F.POLAR_CM, F.POLAR_P1): (lambda y: _p1_from_cm(y, mu), one),
        (F.POLAR_P1, F.POLAR_CM): (lambda y: _cm_from_p1(y, mu), one),
        (F.POLAR_CM, F.INFINITY): (lambda y: _inf_from_cm(y, mu), one),
        # P1 polar runs in t, the regularized chart in tau with dt = r^(3/2) dtau
        (F.REGULARIZED, F.POLAR_P1): (lambda y: _polar_from_reg(y, mu), lambda y: y[0] ** 1.5),
        (F.REDUCED, F.REGULARIZED): (lambda y: _reg_from_reduced(y, mu, h), one),
    }
    return table.get((id_a, id_b))


def consistency_check(
    id_a: FieldId,
    id_b: FieldId,
    state,
    mu: float,
    h: float | None = None,
    fd_step: float = 1e-6,
):
    """Max deviation between the pushforward of field A and field B.

    The tangent vector of A is pushed through the chart Jacobian (central
    finite differences) and compared with B evaluated at the transformed
    state, including the time-change factor.  Returns (deviation,
    inconclusive) where inconclusive flags a state too close to a chart
    singularity for the finite-difference Jacobian to be trusted.
    """
    pair = _transform(id_a, id_b, mu, h)
    if pair is None:
        raise ValueError(f"no transform registered for {id_a.name} -> {id_b.name}")
    to_b, factor = pair
    y = np.asarray(state, dtype=float)
    fa = eval_field(id_a, y, mu, h)
    n = y.size
    m = np.asarray(to_b(y)).size
    jac = np.empty((m, n))
    for j in range(n):
        dy = np.zeros(n)
        dy[j] = fd_step
        jac[:, j] = (to_b(y + dy) - to_b(y - dy)) / (2.0 * fd_step)
    pushed = jac @ fa / factor(y)
    fb = eval_field(id_b, to_b(y), mu, h)
    inconclusive = bool(np.any(~np.isfinite(jac)) or np.linalg.norm(jac) > 1e8)
    return float(np.max(np.abs(pushed - fb))), inconclusive
