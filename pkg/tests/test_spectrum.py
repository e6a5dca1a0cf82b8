import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from invsq.spectrum import (
    INF, DimensionError, SubcriticalCouplingError, WeightSpec, ap_characteristic_estimate,
    conjugate, d_alpha, default_ball_family, dual_weight_check, make_params,
    power_weight_class, smoothing_admissible, weight_admissible, window,
)


def test_make_params_examples():
    p = make_params(3, 0)
    assert (p.sigma, p.nu0, p.delta) == (0.0, 0.5, 0.0)
    assert p.eps_star is None
    p = make_params(3, 2)
    assert p.sigma == -1.0 and p.nu0 == 1.5
    assert p.eps_star == pytest.approx(2 / 27)
    p = make_params(4, -1)
    assert p.sigma == 1.0 and p.nu0 == 0.0 and p.critical


def test_make_params_errors():
    with pytest.raises(DimensionError):
        make_params(2, 0)
    with pytest.raises(SubcriticalCouplingError):
        make_params(3, -0.26)


@settings(max_examples=300)
@given(d=st.integers(3, 12), frac=st.floats(0.0, 50.0))
def test_params_invariants(d, frac):
    a = -((d - 2) / 2) ** 2 + frac
    p = make_params(d, a)
    assert p.sigma + p.nu0 == pytest.approx((d - 2) / 2, abs=1e-12)
    assert p.nu0 >= 0 and p.sigma <= (d - 2) / 2
    if a >= 0:
        assert p.sigma <= 0
    elif a < -1e-12:
        assert p.sigma > 0


def test_d_alpha_and_conjugate():
    assert d_alpha(-1, 3) == INF
    assert d_alpha(1, 3) == 3
    assert d_alpha(0, 5) == INF
    assert conjugate(INF) == 1.0 and conjugate(1.0) == INF
    assert conjugate(2.0) == 2.0


@given(p=st.floats(1.0, 1e6))
def test_conjugate_involution(p):
    assert conjugate(conjugate(p)) == pytest.approx(p, rel=1e-9)


def test_window_examples():
    w = window(make_params(3, 2), 1, "equiv_forward")
    assert (w.p_lower, w.p_upper, w.valid) == (1.0, INF, True)
    w = window(make_params(3, 0), 1, "hardy")
    assert (w.p_lower, w.p_upper, w.valid) == (1.0, 3.0, True)
    w = window(make_params(3, 0), 1, "equiv_reverse")
    assert (w.p_lower, w.p_upper) == (1.0, 3.0)
    with pytest.raises(ValueError):
        window(make_params(3, 0), 1, "nope")


def test_window_side_conditions_and_boundaries():
    p = make_params(3, -0.25)  # sigma = 1/2
    w = window(p, 2.5, "hardy")  # d - s - 2 sigma = -0.5
    assert not w.valid and "sigma" in w.reason
    w = window(p, 1, "square")
    assert (w.p_lower, w.p_upper) == (pytest.approx(1.2), 6.0)
    assert not w.contains(6.0) and not w.contains(1.2) and w.contains(2.0)
    sig = 1.5 - 0.5 * math.sqrt(5)
    w = window(make_params(5, -1), 0.5, "difference")
    assert w.p_lower == 1.0 and w.p_upper == pytest.approx(5 / sig)
    w = window(make_params(5, -2), 0.1, "difference")  # sigma = 1
    assert w.p_lower == pytest.approx(5 / 4.1) and w.p_upper == pytest.approx(5.0)
    assert window(make_params(3, 1), 0.5, "difference").p_upper == INF


@settings(max_examples=100)
@given(d=st.integers(3, 8), frac=st.floats(0.0, 5.0), s1=st.floats(0.01, 2.9), s2=st.floats(0.01, 2.9))
def test_hardy_upper_endpoint_monotone(d, frac, s1, s2):
    p = make_params(d, -((d - 2) / 2) ** 2 + frac)
    lo, hi = sorted((s1, s2))
    assert window(p, hi, "hardy").p_upper <= window(p, lo, "hardy").p_upper


def test_power_weight_class_examples():
    assert power_weight_class(-1, 2, 2, 3) == (True, True)
    assert power_weight_class(0, 7.0, INF, 3) == (True, True)
    assert power_weight_class(3, 2, 2, 3)[0] is False
    assert power_weight_class(-3, 2, 2, 3)[0] is False
    assert power_weight_class(-1, 2, INF, 3)[1] is False
    assert power_weight_class(-2.5, 2, 1.0, 3)[1] is True


def test_weight_admissible_examples():
    rep = weight_admissible(WeightSpec.power(-1), 2, 1, INF, 3)
    assert rep and rep.method == "exact"
    assert weight_admissible(WeightSpec.constant(), 2.5, 1.5, 4.0, 4)
    rep = weight_admissible(WeightSpec.composite(0.5), 2, 1, INF, 3)
    assert rep and rep.method == "envelope+numeric"
    assert rep.details["envelope"] == [-0.5, -1.5]
    assert not weight_admissible(WeightSpec.power(-1), 3.0, 1, 3.0, 3)


def test_dual_weight_example():
    assert dual_weight_check(1, 3, 2, 4, 5)
    assert dual_weight_check(0, 2.5, 1.5, 6, 3)


def test_duality_scan_grid():
    count = 0
    bad = []
    for d in (3, 4, 5):
        for p0, p, q0 in itertools.product((1.1, 1.5, 2.0), (2.2, 3.0, 3.6, 4.5), (5.0, 8.0, 20.0)):
            for alpha in np.arange(-d - 1, d * (p / p0 - 1) + 1 + 1e-9, 0.1):
                count += 1
                if not dual_weight_check(float(alpha), p, p0, q0, d):
                    bad.append((alpha, p, p0, q0, d))
    assert count >= 10_000
    assert not bad


def test_smoothing_admissible():
    assert smoothing_admissible(make_params(3, 1), 0.25)
    rep = smoothing_admissible(make_params(3, 0), 0.25)  # delta = 0
    assert not rep and rep.details["delta_positive"] is False
    assert smoothing_admissible(make_params(4, 0), 0.9)


def test_ap_characteristic_constant_and_power():
    assert ap_characteristic_estimate(WeightSpec.constant(), 2, 3) == pytest.approx(1.0, rel=1e-12)
    # centered balls give 9/(9 - alpha^2) exactly for |x|^alpha in d = 3
    centered = [(0.0, 2.0 ** k) for k in range(-3, 4)]
    for alpha in (-2.0, -1.0, 1.5):
        est = ap_characteristic_estimate(WeightSpec.power(alpha), 2, 3, centered)
        assert est == pytest.approx(9 / (9 - alpha**2), rel=1e-9)


def test_ap_characteristic_divergence():
    assert ap_characteristic_estimate(WeightSpec.power(-3), 2, 3) == INF
    assert ap_characteristic_estimate(WeightSpec.power(-3.5), 2, 3) == INF
    finite = [ap_characteristic_estimate(WeightSpec.power(a), 2, 3) for a in (-2.5, -2.8, -2.9)]
    assert finite[0] < finite[1] < finite[2] < INF


def test_ap_characteristic_composite_stable_under_family_doubling():
    w = WeightSpec.composite(0.5)
    e1 = ap_characteristic_estimate(w, 2, 3)
    e2 = ap_characteristic_estimate(w, 2, 3, default_ball_family(levels=40, off_levels=20))
    assert math.isfinite(e1) and abs(e2 - e1) <= 0.05 * e1


def test_ap_characteristic_uniform_in_eps():
    vals = [ap_characteristic_estimate(WeightSpec.composite(e), 2, d)
            for d in (3, 4, 5) for e in np.arange(0.05, 0.951, 0.05)]
    assert max(vals) <= 50


def test_weight_table_and_parse():
    r = np.geomspace(1e-3, 1e3, 30)
    w = WeightSpec.table(r, r ** -0.5)
    lo, hi = w.envelope()
    assert lo == pytest.approx(-0.5) and hi == pytest.approx(-0.5)
    np.testing.assert_allclose(w(np.array([0.1, 10.0])), [0.1 ** -0.5, 10 ** -0.5], rtol=1e-12)
    assert WeightSpec.parse("composite:0.25").eps == 0.25
    assert WeightSpec.parse("1").is_constant
    with pytest.raises(ValueError):
        WeightSpec.parse("bogus")
