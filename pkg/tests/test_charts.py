import math

import numpy as np
import pytest

from pcrtbp import charts
from pcrtbp.charts import (
    CM,
    P1,
    CartesianSynodicState,
    CollisionChartState,
    EnergyMismatchError,
    PolarState,
    SingularChartError,
)
from pcrtbp.constants import KAPPA


def random_polar_p1(rng, n):
    r = rng.uniform(0.05, 5.0, n)
    theta = rng.uniform(-np.pi, np.pi, n)
    R = rng.uniform(-2.0, 2.0, n)
    Theta = rng.uniform(-2.0, 2.0, n)
    return r, theta, R, Theta


def test_to_polar_axis_point():
    st = charts.to_polar(CartesianSynodicState(1.0, 0.0, 0.0, 1.0), CM, mu=0.0)
    assert (st.r, st.theta, st.R, st.Theta) == (1.0, 0.0, 0.0, 1.0)


def test_to_polar_p1_offset_point():
    mu = 0.1
    st = charts.to_polar(CartesianSynodicState(-mu + 0.5, 0.0, 0.0, 0.0), P1, mu)
    assert st.r == pytest.approx(0.5, abs=1e-15)
    assert st.theta == 0.0 and st.R == 0.0 and st.Theta == 0.0


def test_polar_round_trip_random(rng):
    mu = 0.0123
    for center in (CM, P1):
        q1 = rng.uniform(-3, 3, 10_000)
        q2 = rng.uniform(-3, 3, 10_000)
        p1 = rng.uniform(-2, 2, 10_000)
        p2 = rng.uniform(-2, 2, 10_000)
        r, th, R, Th = charts.cart_to_polar_arrays(q1, q2, p1, p2, mu, center)
        b1, b2, b3, b4 = charts.polar_to_cart_arrays(r, th, R, Th, mu, center)
        for a, b in zip((q1, q2, p1, p2), (b1, b2, b3, b4)):
            assert np.max(np.abs(a - b)) < 1e-12


def test_cm_to_p1_identity_at_mu_zero(rng):
    r, th, R, Th = random_polar_p1(rng, 100)
    out = charts.cm_polar_to_p1_polar_arrays(r, th, R, Th, 0.0)
    for a, b in zip((r, th, R, Th), out):
        assert np.max(np.abs(a - b)) < 1e-14


def test_cm_to_p1_collinear():
    st = charts.cm_polar_to_p1_polar(PolarState(CM, 2.0, 0.0, 0.3, 0.7), mu=0.1)
    assert st.r == pytest.approx(2.1, abs=1e-15)
    assert st.theta == 0.0


def test_cm_to_p1_matches_cartesian_route(rng):
    mu = 0.0731
    r, th, R, Th = random_polar_p1(rng, 2000)
    r = r + 2 * mu  # keep away from P1 where the chart degenerates
    direct = charts.cm_polar_to_p1_polar_arrays(r, th, R, Th, mu)
    via_cart = charts.cart_to_polar_arrays(
        *charts.polar_to_cart_arrays(r, th, R, Th, mu, CM), mu, P1
    )
    for a, b in zip(direct, via_cart):
        assert np.max(np.abs(a - b)) < 1e-12


def test_p1_to_cm_round_trip(rng):
    mu = 0.05
    r, th, R, Th = random_polar_p1(rng, 2000)
    r = r + 2 * mu
    mid = charts.cm_polar_to_p1_polar_arrays(r, th, R, Th, mu)
    back = charts.p1_polar_to_cm_polar_arrays(*mid, mu)
    for a, b in zip((r, th, R, Th), back):
        assert np.max(np.abs(a - b)) < 1e-12


def test_infinity_chart_values_and_round_trip(rng):
    assert charts.to_infinity_chart(PolarState(CM, 2.0, 0.1, 0.2, 0.3)).xi == 1.0
    assert charts.to_infinity_chart(PolarState(CM, 200.0, 0.1, 0.2, 0.3)).xi == pytest.approx(
        0.1, abs=1e-16
    )
    for r in rng.uniform(0.1, 300.0, 1000):
        st = PolarState(CM, float(r), 0.3, -0.2, 0.9)
        back = charts.from_infinity_chart(charts.to_infinity_chart(st))
        assert abs(back.r - st.r) < 1e-14 * max(1.0, st.r)


def test_to_reduced_ejection_point():
    st = CollisionChartState(KAPPA, 0.4, math.sqrt(2.0), -KAPPA**1.5)
    red = charts.to_reduced(st, mu=0.0, h=0.0)
    assert red.s == pytest.approx(math.sqrt(KAPPA), abs=1e-15)
    assert red.rho == pytest.approx(KAPPA**3, rel=1e-14)
    assert abs(red.energy_residual) < 1e-13


def test_to_reduced_collision_point():
    red = charts.to_reduced(CollisionChartState(0.0, 1.0, math.sqrt(2.0), 0.0), 0.0, 0.0)
    assert red.rho == pytest.approx(0.0, abs=1e-15)
    assert red.alpha == pytest.approx(math.pi / 2.0)


def test_reduced_round_trip_on_shell(rng):
    mu, h = 0.02, -0.1
    for _ in range(300):
        s = rng.uniform(0.01, 1.2)
        th = rng.uniform(-np.pi, np.pi)
        al = rng.uniform(-np.pi, np.pi)
        red = charts.reduced_from_coords(s, th, al, mu, h)
        back = charts.to_reduced(charts.from_reduced(red, mu), mu, h, tol=1e-12)
        assert abs(back.s - s) < 1e-12
        assert abs(back.alpha - al) < 1e-12 or abs(abs(back.alpha - al) - 2 * np.pi) < 1e-12
        assert abs(back.energy_residual) < 1e-12


def test_to_reduced_energy_mismatch():
    st = CollisionChartState(0.3, 0.0, 1.7, 0.4)
    with pytest.raises(EnergyMismatchError):
        charts.to_reduced(st, mu=0.0, h=0.0)


def test_hamiltonian_parabolic_zero():
    st = PolarState(CM, KAPPA, 1.234, math.sqrt(2.0 / KAPPA), 0.0)
    assert charts.hamiltonian(st, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_hamiltonian_circular_orbit():
    assert charts.hamiltonian(PolarState(CM, 1.0, 0.7, 0.0, 1.0), 0.0) == pytest.approx(-1.5)


def test_hamiltonian_cross_chart_agreement(rng):
    mu = 0.013
    r, th, R, Th = random_polar_p1(rng, 10_000)
    r = r + 0.1
    h_p1 = charts.hamiltonian_polar_p1(r, th, R, Th, mu)
    cart = charts.polar_to_cart_arrays(r, th, R, Th, mu, P1)
    h_cart = charts.hamiltonian_cartesian(*cart, mu)
    cm = charts.cart_to_polar_arrays(*cart, mu, CM)
    h_cm = charts.hamiltonian_polar_cm(*cm, mu)
    h_inf = charts.hamiltonian_infinity(np.sqrt(2.0 / cm[0]), cm[1], cm[2], cm[3], mu)
    coll = charts.polar_to_collision_arrays(r, th, R, Th, mu)
    h_coll = charts.hamiltonian_collision(*coll, mu)
    for other in (h_cart, h_cm, h_inf, h_coll):
        assert np.max(np.abs(other - h_p1)) < 1e-12


def test_hamiltonian_invariant_under_chart_round_trips(rng):
    mu = 0.004
    for _ in range(50):
        st = PolarState(
            P1,
            float(rng.uniform(0.2, 3.0)),
            float(rng.uniform(-np.pi, np.pi)),
            float(rng.uniform(-1, 1)),
            float(rng.uniform(-1, 1)),
        )
        h0 = charts.hamiltonian(st, mu)
        h1 = charts.hamiltonian(charts.to_collision_chart(st, mu), mu)
        h2 = charts.hamiltonian(charts.p1_polar_to_cm_polar(st, mu), mu)
        assert abs(h1 - h0) < 1e-12 and abs(h2 - h0) < 1e-12


def test_reversibility_commutes_with_transforms(rng):
    mu = 0.07
    for _ in range(200):
        st = PolarState(
            P1,
            float(rng.uniform(0.3, 3.0)),
            float(rng.uniform(-2.5, 2.5)),
            float(rng.uniform(-1, 1)),
            float(rng.uniform(-1, 1)),
        )
        a = charts.to_collision_chart(charts.reverse(st), mu)
        b = charts.reverse(charts.to_collision_chart(st, mu))
        assert abs(a.v - b.v) < 1e-13 and abs(a.u - b.u) < 1e-13
        c = charts.from_polar(charts.reverse(st), mu)
        d = charts.reverse(charts.from_polar(st, mu))
        for x, y in zip((c.q1, c.q2, c.p1, c.p2), (d.q1, d.q2, d.p1, d.p2)):
            assert abs(x - y) < 1e-13


def test_singularity_guard():
    with pytest.raises(SingularChartError):
        charts.to_polar(CartesianSynodicState(0.0, 0.0, 0.1, 0.1), CM, 0.0)
    with pytest.raises(SingularChartError):
        charts.from_infinity_chart(charts.InfinityChartState(0.0, 0.0, 0.0, 0.0))


def test_wrap_angle():
    assert charts.wrap_angle(3 * math.pi) == pytest.approx(math.pi)
    assert charts.wrap_angle(-math.pi) == pytest.approx(math.pi)
    arr = charts.wrap_angle(np.array([0.0, 2 * math.pi + 0.5]))
    assert arr[1] == pytest.approx(0.5)
