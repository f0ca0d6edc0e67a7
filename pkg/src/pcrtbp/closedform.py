"""Exact mu = 0 and collision-manifold solutions, used as oracles.

The zero-energy Kepler problem in the rotating frame has the parabolic
ejection/collision family in closed form, and the collision torus carries
an explicit family of heteroclinic orbits between the equilibrium circles.
"""

import math
from dataclasses import dataclass

from .constants import KAPPA, SQRT2, m0
from .charts import CM, CollisionChartState, PolarState, ReducedCollisionState

A_EXP = 3.0 / SQRT2  # exponent rate of the regularized ejection solution


@dataclass(frozen=True)
class ParabolicOrbit:
    """Zero-energy radial-parabola family; sign +1 lives on t > 0, -1 on t < 0."""

    sign: int
    theta_bar: float = 0.0

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")

    def eval(self, t: float, center: str = CM) -> PolarState:
        if self.sign * t <= 0.0:
            raise ValueError(f"orbit with sign {self.sign:+d} is defined for sign*t > 0")
        at = abs(t)
        r = KAPPA * at ** (2.0 / 3.0)
        R = self.sign * math.sqrt(2.0 / KAPPA) / at ** (1.0 / 3.0)
        return PolarState(center, r, self.theta_bar - t, R, 0.0)


def eval_parabolic(orbit: ParabolicOrbit, t: float, center: str = CM) -> PolarState:
    return orbit.eval(t, center)


@dataclass(frozen=True)
class CollisionHeteroclinic:
    """Heteroclinic from S^-(theta_bar) to S^+(theta_bar) inside the torus s = 0."""

    theta_bar: float = 0.0
    mu: float = 0.0

    def alpha(self, tau: float) -> float:
        return 2.0 * math.atan(math.tanh(0.25 * m0(self.mu) * tau))

    def alpha_dot(self, tau: float) -> float:
        x = 0.25 * m0(self.mu) * tau
        th = math.tanh(x)
        return 0.5 * m0(self.mu) / math.cosh(x) ** 2 / (1.0 + th * th)

    def eval(self, tau: float) -> ReducedCollisionState:
        a = self.alpha(tau)
        return ReducedCollisionState(0.0, self.theta_bar + math.pi + 2.0 * a, a, 0.0)


def eval_heteroclinic(het: CollisionHeteroclinic, tau: float) -> ReducedCollisionState:
    return het.eval(tau)


def eval_regularized_ejection(theta_bar: float, tau: float) -> CollisionChartState:
    """The mu = 0 ejection orbit (unstable fiber of S^+) in (r, theta, v, u)."""
    e = math.exp(A_EXP * tau)
    return CollisionChartState(
        KAPPA * math.exp(SQRT2 * tau), theta_bar - e, SQRT2, -KAPPA**1.5 * e
    )


def ejection_time_of_tau(tau: float) -> float:
    """Physical time along the regularized ejection orbit, t(tau) = exp(3 tau / sqrt 2).

    This is the closed form of the time change integral t = int r^(3/2) dtau
    from tau = -infinity (collision at t = 0).
    """
    return math.exp(A_EXP * tau)
