"""Coordinate charts of the rotating-frame three-body problem.

Synodic Cartesian, synodic polar centered at the center of mass or at the
heavy primary, the compactified chart at infinity (r_hat = 2 xi^-2), the
regularized collision chart (r, theta, v, u) and its reduced form
(s, theta, alpha) on the energy manifold.  All transforms are exact and
invertible away from the chart singularities; the Hamiltonian evaluated in
any chart agrees on the same physical point.

Angles handed to these functions may be lifted to the real line; transforms
never wrap them except where a new angle is produced by ``atan2``.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .backend import kernels

R_GUARD = 1e-14  # below this radius a polar-type chart refuses to evaluate

CM = "CM"
P1 = "P1"


class SingularChartError(ValueError):
    """Input sits on (or numerically too close to) the chart's singular set."""


class EnergyMismatchError(ValueError):
    """State and energy level disagree beyond tolerance."""


def validate_mu(mu: float, allow_zero: bool = True) -> float:
    lo = 0.0 if allow_zero else np.nextafter(0.0, 1.0)
    if not (lo <= mu <= 0.5):
        raise ValueError(f"mass ratio mu={mu} outside [0, 1/2]")
    return mu


@dataclass(frozen=True)
class CartesianSynodicState:
    q1: float
    q2: float
    p1: float
    p2: float


@dataclass(frozen=True)
class PolarState:
    center: str  # CM or P1
    r: float
    theta: float
    R: float
    Theta: float


@dataclass(frozen=True)
class InfinityChartState:
    xi: float
    theta_hat: float
    R_hat: float
    Theta_hat: float


@dataclass(frozen=True)
class CollisionChartState:
    r: float
    theta: float
    v: float
    u: float


@dataclass(frozen=True)
class ReducedCollisionState:
    s: float
    theta: float
    alpha: float
    rho: float
    energy_residual: float = 0.0


@dataclass(frozen=True)
class EnergyLevel:
    h: float

    @property
    def theta_hat_0(self) -> float:
        # pairing h = -Theta_hat_0 for the periodic orbits at infinity
        return -self.h


# ---------------------------------------------------------------------------
# array-level transforms (scalar or ndarray arguments)


def cart_to_polar_arrays(q1, q2, p1, p2, mu, center=CM):
    x = q1 + mu if center == P1 else q1
    r = np.hypot(x, q2)
    if np.any(np.asarray(r) < R_GUARD):
        raise SingularChartError("position at the chart center")
    theta = np.arctan2(q2, x)
    R = (x * p1 + q2 * p2) / r
    Theta = x * p2 - q2 * p1
    return r, theta, R, Theta


def polar_to_cart_arrays(r, theta, R, Theta, mu, center=CM):
    ct, st = np.cos(theta), np.sin(theta)
    q1 = r * ct - (mu if center == P1 else 0.0)
    q2 = r * st
    p1 = R * ct - Theta / r * st
    p2 = R * st + Theta / r * ct
    return q1, q2, p1, p2


def cm_polar_to_p1_polar_arrays(r_hat, theta_hat, R_hat, Theta_hat, mu):
    ct = np.cos(theta_hat)
    r = np.sqrt(r_hat * r_hat + 2.0 * r_hat * mu * ct + mu * mu)
    if np.any(np.asarray(r) < R_GUARD):
        raise SingularChartError("point at P1")
    theta = np.arctan2(r_hat * np.sin(theta_hat), r_hat * ct + mu)
    # sqrt(r^2 - 2 mu r cos(theta) + mu^2) is the CM radius r_hat itself;
    # cos(theta - theta_hat) = (r - mu cos(theta)) / r_hat and
    # sin(theta - theta_hat) = -mu sin(theta) / r_hat.
    den = r * r - 2.0 * mu * r * np.cos(theta) + mu * mu
    if np.any(np.asarray(den) < R_GUARD**2):
        raise SingularChartError("degenerate CM radius")
    st = np.sin(theta)
    R = R_hat * (r - mu * np.cos(theta)) / np.sqrt(den) - mu * Theta_hat * st / den
    Theta = mu * R_hat * r * st / np.sqrt(den) + Theta_hat * r * (r - mu * np.cos(theta)) / den
    return r, theta, R, Theta


def p1_polar_to_cm_polar_arrays(r, theta, R, Theta, mu):
    return cart_to_polar_arrays(*polar_to_cart_arrays(r, theta, R, Theta, mu, P1), mu, CM)


def polar_to_collision_arrays(r, theta, R, Theta, mu):
    if np.any(np.asarray(r) < R_GUARD):
        raise SingularChartError("collision map needs r > 0")
    sq = np.sqrt(r)
    v = (R + mu * np.sin(theta)) * sq
    u = (Theta - r * r + mu * r * np.cos(theta)) / sq
    return r, theta, v, u


def collision_to_polar_arrays(r, theta, v, u, mu):
    if np.any(np.asarray(r) < R_GUARD):
        raise SingularChartError("polar chart undefined at r = 0")
    sq = np.sqrt(r)
    R = v / sq - mu * np.sin(theta)
    Theta = u * sq + r * r - mu * r * np.cos(theta)
    return r, theta, R, Theta


# ---------------------------------------------------------------------------
# dataclass-level API


def to_polar(state: CartesianSynodicState, center: str, mu: float) -> PolarState:
    r, th, R, Th = cart_to_polar_arrays(state.q1, state.q2, state.p1, state.p2, mu, center)
    return PolarState(center, float(r), float(th), float(R), float(Th))


def from_polar(state: PolarState, mu: float) -> CartesianSynodicState:
    q1, q2, p1, p2 = polar_to_cart_arrays(
        state.r, state.theta, state.R, state.Theta, mu, state.center
    )
    return CartesianSynodicState(float(q1), float(q2), float(p1), float(p2))


def cm_polar_to_p1_polar(state: PolarState, mu: float) -> PolarState:
    if state.center != CM:
        raise ValueError("expected a CM-centered polar state")
    r, th, R, Th = cm_polar_to_p1_polar_arrays(state.r, state.theta, state.R, state.Theta, mu)
    return PolarState(P1, float(r), float(th), float(R), float(Th))


def p1_polar_to_cm_polar(state: PolarState, mu: float) -> PolarState:
    if state.center != P1:
        raise ValueError("expected a P1-centered polar state")
    r, th, R, Th = p1_polar_to_cm_polar_arrays(state.r, state.theta, state.R, state.Theta, mu)
    return PolarState(CM, float(r), float(th), float(R), float(Th))


def to_infinity_chart(state: PolarState) -> InfinityChartState:
    if state.center != CM:
        raise ValueError("infinity chart is built on the CM polar chart")
    if state.r < R_GUARD:
        raise SingularChartError("r must be positive")
    return InfinityChartState(
        math.sqrt(2.0 / state.r), state.theta, state.R, state.Theta
    )


def from_infinity_chart(state: InfinityChartState) -> PolarState:
    if state.xi < R_GUARD:
        raise SingularChartError("xi = 0 is the point at infinity")
    return PolarState(CM, 2.0 / state.xi**2, state.theta_hat, state.R_hat, state.Theta_hat)


def to_collision_chart(state: PolarState, mu: float) -> CollisionChartState:
    if state.center != P1:
        raise ValueError("collision chart is built on the P1 polar chart")
    r, th, v, u = polar_to_collision_arrays(state.r, state.theta, state.R, state.Theta, mu)
    return CollisionChartState(float(r), float(th), float(v), float(u))


def from_collision_chart(state: CollisionChartState, mu: float) -> PolarState:
    r, th, R, Th = collision_to_polar_arrays(state.r, state.theta, state.v, state.u, mu)
    return PolarState(P1, float(r), float(th), float(R), float(Th))


def to_reduced(
    state: CollisionChartState, mu: float, h: float, tol: float = 1e-10
) -> ReducedCollisionState:
    v2u2 = state.v**2 + state.u**2
    if v2u2 <= 0.0:
        raise SingularChartError("(v, u) = (0, 0) has no polar angle")
    s = math.sqrt(state.r)
    alpha = math.atan2(state.v, state.u)
    rho = v2u2 - 2.0 * (1.0 - mu)
    residual = rho - float(kernels.rho_energy(s, state.theta, mu, h))
    if abs(residual) > tol:
        raise EnergyMismatchError(
            f"state is off the energy level by {residual:.3e} in rho"
        )
    return ReducedCollisionState(s, state.theta, alpha, rho, residual)


def from_reduced(state: ReducedCollisionState, mu: float) -> CollisionChartState:
    p = math.sqrt(2.0 * (1.0 - mu) + state.rho)
    return CollisionChartState(
        state.s**2, state.theta, p * math.sin(state.alpha), p * math.cos(state.alpha)
    )


def reduced_from_coords(s: float, theta: float, alpha: float, mu: float, h: float) -> ReducedCollisionState:
    """Build an on-shell reduced state, deriving rho from the energy relation."""
    return ReducedCollisionState(s, theta, alpha, float(kernels.rho_energy(s, theta, mu, h)))


# ---------------------------------------------------------------------------
# Hamiltonian and reversibility


def hamiltonian_cartesian(q1, q2, p1, p2, mu):
    d1 = np.sqrt((q1 + mu) ** 2 + q2 * q2)
    if np.any(np.asarray(d1) < R_GUARD):
        raise SingularChartError("point at a primary")
    kepler = 0.5 * (p1 * p1 + p2 * p2) - q1 * p2 + q2 * p1 - (1.0 - mu) / d1
    if mu == 0.0:
        return kepler
    d2 = np.sqrt((q1 - 1.0 + mu) ** 2 + q2 * q2)
    if np.any(np.asarray(d2) < R_GUARD):
        raise SingularChartError("point at a primary")
    return kepler - mu / d2


def hamiltonian_polar_cm(r, theta, R, Theta, mu):
    kepler = 0.5 * (R * R + Theta * Theta / (r * r)) - 1.0 / r - Theta
    if mu == 0.0:
        return kepler
    ct = np.cos(theta)
    d1 = np.sqrt(r * r + 2.0 * r * mu * ct + mu * mu)
    d2 = np.sqrt(r * r - 2.0 * r * (1.0 - mu) * ct + (1.0 - mu) ** 2)
    V = (1.0 - mu) / d1 + mu / d2 - 1.0 / r
    return kepler - V


def hamiltonian_polar_p1(r, theta, R, Theta, mu):
    kepler = 0.5 * (R * R + Theta * Theta / (r * r)) - 1.0 / r - Theta
    if mu == 0.0:
        return kepler
    ct, st = np.cos(theta), np.sin(theta)
    W = 1.0 + r * r - 2.0 * r * ct
    return kepler + mu * (1.0 / r + R * st + Theta * ct / r - 1.0 / np.sqrt(W))


def hamiltonian_infinity(xi, theta, R, Theta, mu):
    xi2 = xi * xi
    xi4 = xi2 * xi2
    kepler = 0.5 * (R * R + 0.25 * Theta * Theta * xi4) - 0.5 * xi2 - Theta
    if mu == 0.0:
        return kepler
    ct = np.cos(theta)
    a = 1.0 + xi2 * mu * ct + 0.25 * xi4 * mu * mu
    b = 1.0 - xi2 * (1.0 - mu) * ct + 0.25 * xi4 * (1.0 - mu) ** 2
    V = 0.5 * xi2 * ((1.0 - mu) / np.sqrt(a) + mu / np.sqrt(b) - 1.0)
    return kepler - V


def hamiltonian_collision(r, theta, v, u, mu):
    if np.any(np.asarray(r) < R_GUARD):
        raise SingularChartError("H is singular at collision; use the M-tilde integral")
    kepler = (v * v + u * u) / (2.0 * r) - 0.5 * r * r - (1.0 - mu) / r
    if mu == 0.0:
        return kepler
    W = 1.0 + r * r - 2.0 * r * np.cos(theta)
    return kepler + mu * (-0.5 * mu + r * np.cos(theta) - 1.0 / np.sqrt(W))


def hamiltonian(state, mu: float) -> float:
    """Energy of a chart state; chart-independent on the same physical point."""
    if isinstance(state, CartesianSynodicState):
        return float(hamiltonian_cartesian(state.q1, state.q2, state.p1, state.p2, mu))
    if isinstance(state, PolarState):
        if state.r < R_GUARD:
            raise SingularChartError("polar state at the center")
        fn = hamiltonian_polar_cm if state.center == CM else hamiltonian_polar_p1
        return float(fn(state.r, state.theta, state.R, state.Theta, mu))
    if isinstance(state, InfinityChartState):
        return float(
            hamiltonian_infinity(state.xi, state.theta_hat, state.R_hat, state.Theta_hat, mu)
        )
    if isinstance(state, CollisionChartState):
        return float(hamiltonian_collision(state.r, state.theta, state.v, state.u, mu))
    if isinstance(state, ReducedCollisionState):
        c = from_reduced(state, mu)
        return float(hamiltonian_collision(c.r, c.theta, c.v, c.u, mu))
    raise TypeError(f"not a chart state: {state!r}")


def reverse(state):
    """The reversibility involution (theta, R-like momenta flip sign)."""
    if isinstance(state, CartesianSynodicState):
        return replace(state, q2=-state.q2, p1=-state.p1)
    if isinstance(state, PolarState):
        return replace(state, theta=-state.theta, R=-state.R)
    if isinstance(state, InfinityChartState):
        return replace(state, theta_hat=-state.theta_hat, R_hat=-state.R_hat)
    if isinstance(state, CollisionChartState):
        return replace(state, theta=-state.theta, v=-state.v)
    if isinstance(state, ReducedCollisionState):
        return replace(state, theta=-state.theta, alpha=-state.alpha)
    raise TypeError(f"not a chart state: {state!r}")


def wrap_angle(theta):
    """Wrap to (-pi, pi]; used only at section and output boundaries."""
    w = np.remainder(np.asarray(theta) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if np.ndim(theta) == 0 else w
