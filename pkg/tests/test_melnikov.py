import math

import numpy as np
import pytest

from pcrtbp import melnikov as mel
from pcrtbp.backend import kernels
from pcrtbp.constants import KAPPA, SQRT2
from pcrtbp.melnikov import (
    B_PLUS,
    MelnikovDomainError,
    QuadratureBudget,
    i2_closed,
    melnikov_minus,
    melnikov_plus,
    melnikov_plus_derivative,
)

POLE = SQRT2 / 3.0


def brute_force_m_plus(theta, n=1_000_001, lo=1e-6, hi=1e3):
    """Independent oracle: composite Simpson on a fixed million-node grid."""
    from scipy.integrate import simpson

    s = np.linspace(lo, hi, n)
    vals = kernels.melnikov_f1(s, theta)
    main = simpson(vals, x=s)
    return KAPPA * main + mel.SQRT_2_OVER_KAPPA * mel.cos_integral_closed(theta)


def test_minus_is_reflected_plus():
    for th in (0.0, 1.3, -2.0):
        a = melnikov_minus(th)
        b = melnikov_plus(-th)
        assert a.value == -b.value and a.err == b.err


def test_value_against_brute_force_oracle():
    for th in (0.0, 1.5, 3.0):
        ev = melnikov_plus(th)
        oracle = brute_force_m_plus(th)
        assert abs(ev.value - oracle) < ev.err + 1e-3


def test_value_enclosure_width_at_defaults():
    ev = melnikov_plus(0.0)
    assert ev.hi - ev.lo < 0.5


def test_derivative_enclosure_matches_paper():
    ev = melnikov_plus_derivative(0.0)
    assert -5.15341 <= ev.value <= -4.56572
    assert ev.hi - ev.lo <= 0.6


def test_tail_bound_reference_values():
    # inner bound at c = 0.001 evaluates to ~6.5e-6 before the kappa factor
    assert mel.inner_tail_i1(0.001) == pytest.approx(6.53e-6, rel=0.02)
    # outer bound at C = 100 evaluates to ~0.1611 before the kappa factor
    assert mel.outer_tail_i1(100.0) == pytest.approx(0.1611, abs=2e-4)


def test_tail_bounds_dominate_numeric_tails():
    budget = QuadratureBudget(panel_target=1e-13)
    for th in (0.0, 2.5, -1.0):
        v, _ = mel.gauss_kronrod_panels(
            lambda s: kernels.melnikov_f1(s, th), 100.0, 2.0e4, budget
        )
        assert abs(v) < mel.outer_tail_f1(100.0)
        v, _ = mel.gauss_kronrod_panels(
            lambda s: kernels.melnikov_di1(s, th), 100.0, 2.0e4, budget
        )
        assert abs(v) < mel.outer_tail_i1(100.0)
        v, _ = mel.gauss_kronrod_panels(
            lambda s: kernels.melnikov_f1(s, th), 1e-9, 0.001, budget
        )
        assert abs(v) < mel.inner_tail_f1(0.001)
        v, _ = mel.gauss_kronrod_panels(
            lambda s: kernels.melnikov_di1(s, th), 1e-9, 0.001, budget
        )
        assert abs(v) < mel.inner_tail_i1(0.001)


def test_i2_closed_values():
    assert i2_closed(0.0) == pytest.approx(-1.29067, abs=1e-4)
    assert i2_closed(math.pi / 2.0) == pytest.approx(0.745169, abs=1e-4)
    # exact form
    th = 0.77
    expect = math.sqrt(2.0 / KAPPA) * mel.GAMMA_TWO_THIRDS * (
        math.sin(th) / 2.0 - math.sqrt(3.0) / 2.0 * math.cos(th)
    )
    assert i2_closed(th) == expect


def test_i2_oscillatory_oracle_matches_closed_form():
    for th in (0.0, 0.7, 2.2, -1.4):
        assert abs(mel.i2_quadrature_oracle(th) - i2_closed(th)) < 1e-4


def test_derivative_against_central_difference():
    th = 1.0
    ev = melnikov_plus_derivative(th)
    step = 1e-5
    fd = (melnikov_plus(th + step).value - melnikov_plus(th - step).value) / (2 * step)
    assert abs(fd - ev.value) < max(ev.err, 1e-3)


def test_derivative_fd_on_many_angles(rng):
    count = 0
    while count < 50:
        th = float(rng.uniform(-math.pi, math.pi))
        if not mel.is_admissible(th, 0.5):
            continue
        count += 1
        ev = melnikov_plus_derivative(th)
        step = 1e-5
        fd = (melnikov_plus(th + step).value - melnikov_plus(th - step).value) / (2 * step)
        assert abs(fd - ev.value) < ev.err + melnikov_plus(th).err / step * 1e-6 + 1e-4


def test_budget_consistency_under_refinement():
    th = 1.2
    base = melnikov_plus(th)
    sharp = melnikov_plus(th, QuadratureBudget(c=0.0001, C=1000.0))
    assert abs(sharp.value - base.value) < base.err
    base_d = melnikov_plus_derivative(th)
    sharp_d = melnikov_plus_derivative(th, QuadratureBudget(c=0.0001, C=1000.0))
    assert abs(sharp_d.value - base_d.value) < base_d.err


def test_domain_error_in_excluded_window():
    with pytest.raises(MelnikovDomainError):
        melnikov_plus(POLE + 0.1)
    with pytest.raises(MelnikovDomainError):
        melnikov_plus_derivative(POLE - 0.2)


def test_lipschitz_bound_dominates_second_difference():
    for th in (0.0, 1.5, -1.0):
        h = 1e-4
        lb = mel.derivative_lipschitz_bound(th - h, th + h)
        d2 = (
            melnikov_plus_derivative(th + h).value
            - melnikov_plus_derivative(th - h).value
        ) / (2 * h)
        assert abs(d2) < lb


def test_certification_at_theta_zero_negative():
    rep = mel.certify_sign_on_b_plus(grid_n=30, intervals=((-0.05, 0.05),))
    assert rep["certified"]
    assert rep["derivative_at_zero_negative"]
    assert all(r["value"] < 0 for r in rep["uncertified"]) or not rep["uncertified"]


def test_certification_coarse_full_b_plus():
    # N=600 is the coarsest grid whose Lipschitz slack clears all of B+;
    # the acceptance suite runs the full N=10000
    rep = mel.certify_sign_on_b_plus(grid_n=600)
    assert rep["certified"]
    assert rep["worst_margin"] > 0


def test_certification_fails_across_a_true_zero():
    # dM+/dtheta changes sign inside the gap (-0.583065, -0.407155)
    lo, hi = -0.583065, -0.407155
    dlo = melnikov_plus_derivative(lo, QuadratureBudget(C=1000.0, exclusion=0.3))
    dhi = melnikov_plus_derivative(hi, QuadratureBudget(C=1000.0, exclusion=0.3))
    assert dlo.value * dhi.value < 0
    rep = mel.certify_sign_on_b_plus(grid_n=8, intervals=((lo, hi),))
    assert not rep["certified"]
    assert rep["uncertified"]


def test_half_integrals_splitting_identity():
    delta = 0.2
    w_sig = (SQRT2 / 3.0) * delta**3
    for th in (0.0, 1.4, -0.9):
        i_s, i_inf = mel.half_integrals(th, delta**2)
        whole = melnikov_plus(th + w_sig)
        lhs = whole.value
        rhs = -(i_s.value + i_inf.value)
        assert abs(lhs - rhs) < whole.err + i_s.err + i_inf.err + 1e-9


def test_half_integral_collision_side_vanishes_with_delta():
    vals = []
    for delta in (0.2, 0.1, 0.05):
        i_s, _ = mel.half_integrals(1.5, delta**2)
        vals.append(abs(i_s.value))
    assert vals[0] > vals[1] > vals[2]
    # the shrinking interval [0, w_Sigma] makes the integral vanish like delta^2
    assert vals[1] / vals[0] == pytest.approx(0.25, rel=0.2)
    assert vals[2] < 2e-4


def test_scan_marks_excluded_angles():
    thetas = np.array([0.0, POLE, 2.0])
    _, vals, errs = mel.scan(thetas, kind="derivative")
    assert math.isnan(vals[1]) and not math.isnan(vals[0]) and not math.isnan(vals[2])


def test_scan_threaded_matches_serial():
    thetas = np.linspace(1.5, 3.0, 17)
    _, v1, e1 = mel.scan(thetas, kind="value", threads=1)
    _, v4, e4 = mel.scan(thetas, kind="value", threads=4)
    assert np.array_equal(v1, v4) and np.array_equal(e1, e4)
