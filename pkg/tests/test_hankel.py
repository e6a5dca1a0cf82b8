import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from invsq.hankel import (
    DivergentSubordinationError, GridConfig, GridMismatchError, PlanConfig, RadialFunction,
    RoundTripError, apply_multiplier, build_plan, composite_rule, fractional_power_spectral,
    fractional_power_subordination, heat, radial_derivative, radial_grid, schrodinger,
    sphere_area, subordination_multiplier, subordination_rule, weighted_lp_norm,
)
from invsq.spectrum import WeightSpec, make_params

CASES = [(3, 0.0), (3, 1.0), (4, -1.0), (5, 2.0)]


@pytest.fixture(scope="module", params=CASES, ids=lambda c: f"d{c[0]}a{c[1]:g}")
def plan(request):
    return build_plan(make_params(*request.param))


def weber_pair(plan, b=1.0):
    """``r^(nu-kappa) e^{-b r^2/2}`` and its exact transform."""
    nu, kappa = plan.order, (plan.d - 2) / 2
    f = plan.r ** (nu - kappa) * np.exp(-b * plan.r ** 2 / 2)
    fh = b ** (-(nu + 1)) * plan.lam ** (nu - kappa) * np.exp(-plan.lam ** 2 / (2 * b))
    return f, fh


def test_sphere_area():
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert sphere_area(4) == pytest.approx(2 * math.pi ** 2)


def test_composite_rule_integrates_polynomials_and_gaussians():
    x, w = composite_rule(GridConfig(1e-6, 40.0, 40.0), 3)
    # weights carry x^(d-1)
    assert np.dot(w, np.exp(-x ** 2)) == pytest.approx(math.sqrt(math.pi) / 4, rel=1e-12)
    assert np.all(np.diff(x) > 0) and np.all(w > 0)


def test_forward_matches_weber_integral(plan):
    f, fh = weber_pair(plan)
    np.testing.assert_allclose(plan.forward(f), fh, atol=1e-10 * np.abs(fh).max())


def test_roundtrip_and_parseval(plan):
    f, fh = weber_pair(plan, 2.0)
    rt = plan.roundtrip(f)
    assert np.max(np.abs(rt - f)) <= 1e-9 * np.abs(f).max()
    assert plan.spectral_l2(plan.forward(f)) == pytest.approx(plan.radial_l2(f), rel=1e-10)
    assert plan.roundtrip_error <= plan.config.roundtrip_tol


def test_heat_multiplier_has_closed_form(plan):
    # e^{-tL} maps the b = 1 Weber profile to a rescaled one with b = 1/(1+2t)
    t = 0.3
    f, _ = weber_pair(plan)
    nu, kappa = plan.order, (plan.d - 2) / 2
    b = 1 / (1 + 2 * t)
    exact = b ** (nu + 1) * plan.r ** (nu - kappa) * np.exp(-b * plan.r ** 2 / 2)
    got = apply_multiplier(plan, f, heat(t)).values
    np.testing.assert_allclose(got.real, exact, atol=1e-10 * np.abs(exact).max())


def test_schrodinger_is_unitary(plan):
    f, _ = weber_pair(plan)
    u = apply_multiplier(plan, f, schrodinger(0.7))
    assert plan.radial_l2(u) == pytest.approx(plan.radial_l2(f), rel=1e-9)


def test_radial_derivative():
    plan = build_plan(make_params(3, 0.0))
    f = plan.sample(lambda r: np.exp(-r ** 2 / 2))
    np.testing.assert_allclose(radial_derivative(plan, f).values.real, -plan.r * f.values,
                               atol=1e-10)


def test_evaluate_off_grid():
    plan = build_plan(make_params(4, 0.0))
    fh = np.exp(-plan.lam ** 2 / 2)
    r = np.array([0.05, 0.5, 3.3])
    np.testing.assert_allclose(plan.evaluate(fh, r), np.exp(-r ** 2 / 2), rtol=1e-10)


def test_grid_mismatch_rejected():
    p3 = build_plan(make_params(3, 0.0))
    p4 = build_plan(make_params(3, 0.0), config=PlanConfig(r_max=30.0))
    with pytest.raises(GridMismatchError):
        p3.forward(p4.sample(lambda r: np.exp(-r ** 2)))
    with pytest.raises(GridMismatchError):
        p3.forward(build_plan(make_params(4, 0.0)).sample(lambda r: np.exp(-r ** 2)))


def test_coarse_plan_fails_self_test():
    with pytest.raises(RoundTripError):
        build_plan(make_params(3, 1.0), config=PlanConfig(lam_max=4.0, oversample=0.2, extra=2,
                                                          min_nodes=2))


def test_plan_config_json_roundtrip():
    cfg = PlanConfig(r_max=30.0)
    assert PlanConfig.from_json(cfg.to_json()) == cfg
    assert cfg.scaled(1.5).oversample == pytest.approx(1.05)


def test_radial_function_csv(tmp_path):
    grid = radial_grid(3, 1e-3, 5.0, 10.0)
    f = RadialFunction(grid, np.exp(-grid.nodes))
    path = tmp_path / "f.csv"
    f.to_csv(path)
    g = RadialFunction.from_csv(grid, path)
    np.testing.assert_allclose(g.values, f.values, rtol=1e-15)


def test_weighted_norm_of_gaussian():
    plan = build_plan(make_params(3, 0.0))
    f = plan.sample(lambda r: np.exp(-r ** 2))
    # int |x|^-1 e^{-2 r^2} dx = 4 pi / 4
    assert weighted_lp_norm(f, WeightSpec.power(-1), 2) ** 2 == pytest.approx(math.pi, rel=1e-10)
    assert weighted_lp_norm(f, None, 2) == pytest.approx(plan.radial_l2(f), rel=1e-12)


@pytest.mark.parametrize("s", [0.25, 0.5, 1.0, 1.5])
@pytest.mark.parametrize("direction", ["positive", "negative"])
def test_subordination_matches_multiplier(s, direction):
    plan = build_plan(make_params(3, 1.0))
    f, _ = weber_pair(plan)
    a = fractional_power_spectral(plan, f, s, direction).values
    b = fractional_power_subordination(plan, f, s, direction).values
    assert np.max(np.abs(a - b)) <= 1e-6 * np.abs(a).max()


def test_collapsed_subordination_equals_physical_sum():
    plan = build_plan(make_params(4, 0.0))
    f, _ = weber_pair(plan)
    a = fractional_power_subordination(plan, f, 0.5, "positive").values
    b = fractional_power_subordination(plan, f, 0.5, "positive", collapse=False).values
    assert np.max(np.abs(a - b)) <= 1e-12 * np.abs(a).max()


def test_truncated_subordination_is_flagged():
    rule = subordination_rule(1.0, "negative", 1e-6, 40.0)
    rule.log_t = rule.log_t[: len(rule.log_t) // 3]
    with pytest.raises(DivergentSubordinationError):
        subordination_multiplier(np.geomspace(1e-3, 10, 50), 1.0, "negative", rule)


@settings(max_examples=25, deadline=None)
@given(s=st.floats(0.05, 1.95), lam=st.floats(1e-3, 30.0))
def test_subordination_multiplier_property(s, lam):
    rule = subordination_rule(s, "positive", 1e-6, 40.0)
    m = subordination_multiplier(np.array([lam]), s, "positive", rule)
    assert m[0] == pytest.approx(lam ** s, rel=1e-9)


@settings(max_examples=15, deadline=None)
@given(t1=st.floats(0.0, 2.0), t2=st.floats(0.0, 2.0))
def test_heat_semigroup_property(t1, t2):
    plan = build_plan(make_params(3, 1.0))
    f, _ = weber_pair(plan)
    a = apply_multiplier(plan, apply_multiplier(plan, f, heat(t1)), heat(t2)).values
    b = apply_multiplier(plan, f, heat(t1 + t2)).values
    assert np.max(np.abs(a - b)) <= 1e-9 * np.abs(f).max()
