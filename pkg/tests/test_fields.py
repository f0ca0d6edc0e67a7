import math

import numpy as np
import pytest

from pcrtbp import charts, closedform, fields
from pcrtbp.constants import KAPPA, SQRT2
from pcrtbp.fields import FieldId, FirstIntegral


def test_torus_equilibria_on_splus():
    for theta in (0.0, 1.0, -2.0):
        f = fields.eval_field(FieldId.COLLISION_TORUS, (theta, math.pi / 2), 0.1)
        assert np.allclose(f, 0.0, atol=1e-16)


def test_torus_theta_rate_twice_alpha_rate(rng):
    for _ in range(100):
        y = rng.uniform(-3, 3, 2)
        f = fields.eval_field(FieldId.COLLISION_TORUS, y, float(rng.uniform(0, 0.5)))
        assert f[0] == pytest.approx(2.0 * f[1], rel=1e-15)


def test_regularized_residual_along_ejection():
    # analytic tangent of the closed-form solution against the field
    a = closedform.A_EXP
    for tau in np.linspace(-5.0, 0.0, 21):
        st = closedform.eval_regularized_ejection(0.0, float(tau))
        exact = np.array(
            [
                SQRT2 * KAPPA * math.exp(SQRT2 * tau),
                -a * math.exp(a * tau),
                0.0,
                -(KAPPA**1.5) * a * math.exp(a * tau),
            ]
        )
        f = fields.eval_field(FieldId.REGULARIZED, (st.r, st.theta, st.v, st.u), 0.0)
        assert np.max(np.abs(f - exact)) < 1e-12


def test_infinity_field_on_periodic_orbits():
    for theta, Theta in ((0.0, 0.5), (2.0, -1.0), (1.0, 0.0)):
        f = fields.eval_field(FieldId.INFINITY, (0.0, theta, 0.0, Theta), 0.3)
        assert f[0] == 0.0 and f[2] == 0.0 and f[3] == 0.0
        assert f[1] == -1.0


def test_integral_m_tilde_at_collision():
    v, u = SQRT2 * math.sin(0.3), SQRT2 * math.cos(0.3)
    val = fields.eval_integral(FirstIntegral.M_TILDE, (0.0, 1.0, v, u), 0.0, h=0.7)
    assert abs(val) < 1e-15


def test_integral_m_tilde_along_ejection():
    for tau in np.linspace(-5, 0, 11):
        st = closedform.eval_regularized_ejection(0.4, float(tau))
        val = fields.eval_integral(
            FirstIntegral.M_TILDE, (st.r, st.theta, st.v, st.u), 0.0, h=0.0
        )
        assert abs(val) < 1e-12


def test_integral_h_hat_on_lambda():
    val = fields.eval_integral(FirstIntegral.H_HAT, (0.0, 1.3, 0.0, 0.8), 0.2, h=0.0)
    assert val == pytest.approx(-0.8, abs=1e-15)


def test_consistency_polar_cm_vs_cartesian(rng):
    mu = 0.0489
    worst = 0.0
    for _ in range(1000):
        y = [
            float(rng.uniform(0.3, 4.0)),
            float(rng.uniform(-3, 3)),
            float(rng.uniform(-1.5, 1.5)),
            float(rng.uniform(-1.5, 1.5)),
        ]
        dev, bad = fields.consistency_check(FieldId.POLAR_CM, FieldId.CARTESIAN, y, mu)
        assert not bad
        worst = max(worst, dev)
    assert worst < 1e-6


def test_consistency_regularized_vs_polar_p1(rng):
    mu = 0.03
    for _ in range(200):
        y = [
            float(rng.uniform(0.1, 1.0)),
            float(rng.uniform(-3, 3)),
            float(rng.uniform(-1.0, 1.0)),
            float(rng.uniform(-1.0, 1.0)),
        ]
        dev, bad = fields.consistency_check(FieldId.REGULARIZED, FieldId.POLAR_P1, y, mu)
        assert not bad and dev < 1e-6


def test_consistency_reduced_vs_regularized(rng):
    mu, h = 0.02, -0.05
    for _ in range(200):
        y = [
            float(rng.uniform(0.05, 1.0)),
            float(rng.uniform(-3, 3)),
            float(rng.uniform(-math.pi, math.pi)),
        ]
        dev, bad = fields.consistency_check(FieldId.REDUCED, FieldId.REGULARIZED, y, mu, h)
        assert not bad and dev < 1e-6


def test_consistency_cm_p1_both_ways(rng):
    mu = 0.01
    for _ in range(100):
        y = [
            float(rng.uniform(0.5, 4.0)),
            float(rng.uniform(-3, 3)),
            float(rng.uniform(-1, 1)),
            float(rng.uniform(-1, 1)),
        ]
        dev, _ = fields.consistency_check(FieldId.POLAR_CM, FieldId.POLAR_P1, y, mu)
        assert dev < 1e-6
        dev, _ = fields.consistency_check(FieldId.POLAR_P1, FieldId.POLAR_CM, y, mu)
        assert dev < 1e-6


def test_consistency_cm_vs_infinity(rng):
    for _ in range(100):
        y = [
            float(rng.uniform(2.0, 80.0)),
            float(rng.uniform(-3, 3)),
            float(rng.uniform(-0.5, 0.5)),
            float(rng.uniform(-1, 1)),
        ]
        dev, _ = fields.consistency_check(FieldId.POLAR_CM, FieldId.INFINITY, y, 0.008)
        assert dev < 1e-6


def test_first_integral_derivative_along_fields(rng):
    # d/dtau M-tilde vanishes along the regularized flow on on-shell states,
    # i.e. with h matching the state's own energy
    mu = 0.015

    def mdot(y, h):
        f = fields.eval_field(FieldId.REGULARIZED, y, mu)
        step = 1e-6
        yp = np.asarray(y) + step * f
        ym = np.asarray(y) - step * f
        return (
            fields.eval_integral(FirstIntegral.M_TILDE, yp, mu, h)
            - fields.eval_integral(FirstIntegral.M_TILDE, ym, mu, h)
        ) / (2 * step)

    for _ in range(100):
        y = [
            float(rng.uniform(0.05, 1.5)),
            float(rng.uniform(-3, 3)),
            float(rng.uniform(-1, 1)),
            float(rng.uniform(-1, 1)),
        ]
        h = float(charts.hamiltonian_collision(*y, mu))
        assert abs(mdot(y, h)) < 1e-8


def test_straightened_linearization_eigenvalues():
    mu, h = 0.1, -0.03
    m0 = fields.m0(mu)
    step = 1e-7
    for fid, sgn in ((FieldId.STRAIGHTENED_MINUS, -1.0), (FieldId.STRAIGHTENED_PLUS, 1.0)):
        jac = np.empty((3, 3))
        for j in range(3):
            e = np.zeros(3)
            e[j] = step
            jac[:, j] = (
                fields.eval_field(fid, e, mu, h) - fields.eval_field(fid, -e, mu, h)
            ) / (2 * step)
        eig = np.sort(np.linalg.eigvals(jac).real)
        assert np.allclose(eig, sorted([sgn * m0 / 2, -sgn * m0 / 2, 0.0]), atol=1e-7)


def test_polar_p1_reversibility_anticommutes(rng):
    mu = 0.04
    S = np.diag([1.0, -1.0, -1.0, 1.0])
    for _ in range(200):
        y = np.array(
            [
                float(rng.uniform(0.2, 3.0)),
                float(rng.uniform(-3, 3)),
                float(rng.uniform(-1, 1)),
                float(rng.uniform(-1, 1)),
            ]
        )
        lhs = fields.eval_field(FieldId.POLAR_P1, S @ y, mu)
        rhs = -S @ fields.eval_field(FieldId.POLAR_P1, y, mu)
        assert np.max(np.abs(lhs - rhs)) < 1e-13


def test_lambda_coefficient():
    mu, h = 0.2, -0.1
    expect = (mu**2 + 2 * h + 2 * mu) / (4 * math.sqrt(2 * (1 - mu)))
    assert fields.lambda_coefficient(mu, h) == pytest.approx(expect, rel=1e-15)


def test_reduced_alpha_equation_regular_at_sin_alpha_zero():
    # alpha = 0 makes the printed form 0/0; the implemented form is finite
    f = fields.eval_field(FieldId.REDUCED, (0.3, 1.0, 0.0), 0.01, h=0.0)
    assert np.all(np.isfinite(f))


def test_reduced_rejects_negative_s():
    with pytest.raises(ValueError):
        fields.eval_field(FieldId.REDUCED, (-0.1, 0.0, 0.0), 0.0, h=0.0)
