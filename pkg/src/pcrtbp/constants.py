"""Shared numerical constants.

``KAPPA`` is the radius coefficient of the zero-energy parabolic orbit,
kappa = 3^(2/3) / 2^(1/3), kept as the evaluated expression so it is the
correctly rounded double.
"""

import math

from scipy.special import gamma as _gamma

KAPPA = 3.0 ** (2.0 / 3.0) / 2.0 ** (1.0 / 3.0)

# Gamma(2/3), used by the closed form of the oscillatory Melnikov piece.
GAMMA_TWO_THIRDS = float(_gamma(2.0 / 3.0))

SQRT2 = math.sqrt(2.0)

# Angle of the pole of the Melnikov integrand: kappa * s^(2/3) = 1 at
# s = kappa^(-3/2) = sqrt(2)/3.
MELNIKOV_POLE_ANGLE = SQRT2 / 3.0

TWO_PI = 2.0 * math.pi


def m0(mu: float) -> float:
    """Normal hyperbolicity rate sqrt(2(1-mu)) of the collision circles."""
    return math.sqrt(2.0 * (1.0 - mu))


def w_sigma(delta: float) -> float:
    """Phase shift (sqrt(2)/3) * delta^3 between section angle and Melnikov argument."""
    return (SQRT2 / 3.0) * delta**3
