import math

import numpy as np
import pytest

from pcrtbp import charts, closedform, localmap
from pcrtbp.fields import m0


def test_straightening_round_trips(rng):
    mu = 0.01
    for _ in range(200):
        s = float(rng.uniform(0.0, 0.3))
        th = float(rng.uniform(-3, 3))
        al = float(rng.uniform(-2.0, -1.2))  # near S^-
        back = localmap.unstraighten_minus(*localmap.straighten_minus(s, th, al, mu), mu)
        assert np.allclose(back, (s, th, al), atol=1e-13)
        al = float(rng.uniform(1.2, 2.0))  # near S^+
        back = localmap.unstraighten_plus(*localmap.straighten_plus(s, th, al, mu), mu)
        assert np.allclose(back, (s, th, al), atol=1e-13)


def test_reflection_swaps_sides(rng):
    mu = 0.02
    for _ in range(50):
        s = float(rng.uniform(0.0, 0.3))
        th = float(rng.uniform(-3, 3))
        al = float(rng.uniform(-2.0, -1.2))
        _, bt, z = localmap.straighten_minus(s, th, al, mu)
        _, it, w = localmap.straighten_plus(s, -th, -al, mu)
        assert it == pytest.approx(-bt, abs=1e-14)
        assert w == pytest.approx(-z, abs=1e-14)


def test_ejection_orbit_is_straightened_to_truncation_order():
    # the mu = 0 ejection solution sits on {iota_t = 0} with w = theta_bar up
    # to the s^9 remainder of the cubic truncation (the s^5 and s^7 terms
    # vanish at mu = h = 0)
    theta_bar = 0.8
    for tau in (-4.0, -2.0, -1.0):
        st = closedform.eval_regularized_ejection(theta_bar, tau)
        red = charts.to_reduced(st, 0.0, 0.0)
        _, iota_t, w = localmap.straighten_plus(red.s, red.theta, red.alpha, 0.0)
        assert abs(iota_t) < 0.5 * red.s**9
        assert abs(w - theta_bar) < red.s**9


def test_transit_zero_nu_extension():
    res = localmap.transit(0.0, 0.7, 1e-3, 0.0, 0.1)
    assert res.classification == "extension"
    assert res.iota_out == 0.0 and res.w_out == 0.7


def test_transit_rejects_negative_nu():
    with pytest.raises(ValueError):
        localmap.transit(-1e-4, 0.0, 1e-3, 0.0, 0.1)


def test_transit_estimates_bounds():
    mu, h, delta = 1e-3, 0.0, 0.1
    nus = np.geomspace(1e-5, 1e-2, 9)
    rep = localmap.verify_transition_estimates(
        delta, nus, mu, h, z_in=lambda nu: 0.4 + 0.3 * nu
    )
    assert rep.c1_max <= 5.0 * 1.0  # |iota + nu| <= 5 delta nu, i.e. C1 <= 5
    assert rep.c2_max <= 5.0
    # tangent of the image curve: (0, -1 + O(delta), z_in'(0) + O(delta))
    assert abs(rep.tangent_limit[1] + 1.0) < 3.0 * delta
    assert abs(rep.tangent_limit[2] - 0.3) < 3.0 * delta
    # w-deviation grows superlinearly once nu^2 competes with delta^2 nu
    assert rep.loglog_slope_w > 1.2


def test_transit_limit_point():
    mu, h, delta = 1e-3, 0.0, 0.1
    nu_floor = 1e-6 * delta
    res = localmap.transit(nu_floor, 0.4, mu, h, delta)
    assert abs(res.iota_out) < 1e-6
    assert abs(res.w_out - 0.4) < 1e-6


def test_transit_intermediate_sections_in_order():
    mu, h, delta = 1e-3, 0.0, 0.1
    res = localmap.transit(1e-4, 0.0, mu, h, delta)
    assert set(res.intermediate) == {"sigma1+", "sigma2-"}
    assert res.intermediate["sigma1+"]["tau"] < res.intermediate["sigma2-"]["tau"]
    # the curve reaches beta_t = delta at s1(nu) = nu (1 + O(delta))
    s1 = res.intermediate["sigma1+"]["s"]
    assert s1 == pytest.approx(1e-4, rel=3.0 * delta)


def test_transit_smin_linear_in_nu():
    mu, h, delta = 1e-3, 0.0, 0.1
    ratios = []
    for nu in (1e-5, 1e-4, 1e-3):
        res = localmap.transit(nu, 0.0, mu, h, delta)
        ratios.append(res.s_min / nu)
    assert max(ratios) / min(ratios) < 1.05


def test_transit_preserves_energy_relation():
    mu, h, delta = 1e-3, -1e-4, 0.1
    res = localmap.transit(1e-3, 0.2, mu, h, delta, keep_trajectory=True)
    assert np.max(np.abs(res.trajectory.drift)) < 1e-9


def test_reversibility_maps_transit_to_mirror_transit():
    mu, h, delta = 1e-3, 0.0, 0.1
    t1 = localmap.transit(3e-4, 0.25, mu, h, delta)
    t2 = localmap.transit(-t1.iota_out, -t1.w_out, mu, h, delta)
    assert t2.iota_out == pytest.approx(-3e-4, abs=1e-8)
    assert math.remainder(t2.w_out + 0.25, 2 * math.pi) == pytest.approx(0.0, abs=1e-8)


def test_report_writers(tmp_path):
    mu, h, delta = 1e-3, 0.0, 0.1
    rep = localmap.verify_transition_estimates(
        delta, np.geomspace(1e-4, 1e-2, 5), mu, h
    )
    rep.to_json(tmp_path / "transit.json")
    rep.to_csv(tmp_path / "transit.csv")
    import json

    payload = json.loads((tmp_path / "transit.json").read_text())
    assert {"c1_fit", "c2_fit", "limit_point"} <= payload.keys()
    lines = (tmp_path / "transit.csv").read_text().strip().splitlines()
    assert lines[0] == "nu,iota_out,w_out,s_min"
    assert len(lines) == 6
