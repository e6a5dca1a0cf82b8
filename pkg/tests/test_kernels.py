import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from invsq.kernels import (
    ExponentWindowError, KernelPoint, ScanGrid, TruncationError, bound_ratio_scan,
    complex_time_kernel, derivative_kernel, derivative_kernel_fd, difference_kernel,
    free_derivative_kernel, free_heat_kernel, offdiagonal_check, potential_convolution_check,
    radial_heat_kernel, zonal_heat_kernel, zonal_kernel,
)
from invsq.spectrum import make_params


def _oracle_rule():
    # geometric panels toward 0 resolve the r^(nu-kappa) singularity for a < 0
    x, w = np.polynomial.legendre.leggauss(30)
    edges = np.concatenate([[0.0], np.geomspace(1e-10, 1.0, 21), np.linspace(1.0, 14.0, 27)[1:]])
    a, b = edges[:-1, None], edges[1:, None]
    return (0.5 * (b - a) * x + 0.5 * (b + a)).ravel(), (0.5 * (b - a) * w).ravel()


ORACLE_RHO, ORACLE_W = _oracle_rule()


def weber_heat(params, z, r):
    """``e^{-zL}`` of ``r^(nu-kappa) e^{-r^2/2}``: a Gaussian profile with ``b = 1/(1+2z)``."""
    nu, kappa = params.nu0, params.kappa
    b = 1 / (1 + 2 * z)
    return b ** (nu + 1) * r ** (nu - kappa) * np.exp(-b * r ** 2 / 2)


def apply_kernel(kernel, params, r):
    rho, w = ORACLE_RHO, ORACLE_W
    f = rho ** (params.nu0 - params.kappa) * np.exp(-rho ** 2 / 2)
    K = kernel(r[:, None], rho[None, :])
    return K @ (w * rho ** (params.d - 1) * f)


def test_free_case_matches_radialized_gaussian():
    p = make_params(3, 0.0)
    r = np.geomspace(1e-2, 10, 12)[:, None, None]
    rho = np.geomspace(1e-2, 10, 12)[None, :, None]
    t = np.geomspace(1e-2, 10, 5)[None, None, :]
    exact = (np.exp(-(r - rho) ** 2 / (4 * t)) - np.exp(-(r + rho) ** 2 / (4 * t))) \
        / (2 * r * rho * np.sqrt(math.pi * t))
    np.testing.assert_allclose(radial_heat_kernel(p, t, r, rho), exact, rtol=1e-10)


@pytest.mark.parametrize("d,a", [(3, 1.0), (4, -1.0), (5, 2.0), (3, -0.2)])
def test_heat_kernel_reproduces_weber_evolution(d, a):
    p = make_params(d, a)
    r = np.array([0.1, 0.7, 1.5, 3.0])
    t = 0.4
    got = apply_kernel(lambda x, y: radial_heat_kernel(p, t, x, y), p, r)
    np.testing.assert_allclose(got, weber_heat(p, t, r), rtol=1e-10)


@pytest.mark.parametrize("d,a", [(3, 1.0), (5, -0.5)])
def test_complex_time_kernel_analytic_continuation(d, a):
    p = make_params(d, a)
    r = np.array([0.2, 1.0, 2.5])
    z = 0.5 * np.exp(0.2j * math.pi)
    got = apply_kernel(lambda x, y: complex_time_kernel(p, z, x, y), p, r)
    np.testing.assert_allclose(got, weber_heat(p, z, r), rtol=1e-9)


def test_complex_time_kernel_region():
    p = make_params(3, 1.0)
    with pytest.raises(ValueError):
        complex_time_kernel(p, 1j, 1.0, 1.0)
    np.testing.assert_allclose(complex_time_kernel(p, 0.3 + 0j, 1.2, 0.4).real,
                               radial_heat_kernel(p, 0.3, 1.2, 0.4), rtol=1e-13)


@pytest.mark.parametrize("k", [1, 2])
def test_derivative_kernel_matches_time_differences(k):
    p = make_params(4, 1.0)
    r, rho = np.array([0.3, 1.0, 2.0]), np.array([0.5, 1.1, 0.2])
    exact = derivative_kernel(p, k, 0.7, r, rho)
    fd = derivative_kernel_fd(p, k, 0.7, r, rho, rel_step=0.01)
    np.testing.assert_allclose(fd, exact, rtol=2e-6, atol=1e-9 * np.abs(exact).max())


def test_derivative_kernel_rejects_k0():
    with pytest.raises(ValueError):
        derivative_kernel(make_params(3, 0.0), 0, 1.0, 1.0, 1.0)


@pytest.mark.parametrize("d", [3, 4, 5])
def test_zonal_sum_reproduces_free_gaussian(d):
    p = make_params(d, 0.0)
    rng = np.random.default_rng(d)
    pts = rng.uniform(0.1, 3.0, size=(6, 3))
    c = np.cos(np.linspace(0, math.pi, 5))
    for r, rho, t in pts:
        val, tail = zonal_heat_kernel(p, r=r, rho=rho, t=t, cos_theta=c)
        np.testing.assert_allclose(val, free_heat_kernel(t, r, rho, c, d), rtol=1e-8, atol=1e-14)


@pytest.mark.parametrize("k", [1, 2])
def test_zonal_derivative_kernel_free_case(k):
    p = make_params(3, 0.0)
    c = np.array([1.0, 0.3, -1.0])
    res = zonal_kernel(p, k, 0.8, 0.9, 1.3, c)
    np.testing.assert_allclose(res.value, free_derivative_kernel(k, 0.8, 0.9, 1.3, c, 3),
                               rtol=1e-8)


def test_zonal_kernel_point_interface():
    p = make_params(3, 1.0)
    val, tail = zonal_heat_kernel(p, KernelPoint(0.5, 1.0, 2.0, 0.0))
    assert val > 0 and tail <= 1e-10 * val
    with pytest.raises(ValueError):
        KernelPoint(1.0, -1.0, 1.0)


def test_zonal_truncation_error():
    p = make_params(3, 1.0)
    with pytest.raises(TruncationError):
        zonal_kernel(p, 0, 1e-3, 2.0, 2.0, 1.0, ell_max=32)


def test_difference_kernel_vanishes_for_free_operator():
    p = make_params(4, 0.0)
    assert np.all(difference_kernel(p, 1.0, np.array([0.5, 2.0]), 1.0, 0.2).value == 0)


def test_difference_kernel_sign_follows_coupling():
    # a > 0 makes L_a larger, so L_a e^{-tL_a} - L e^{-tL} is not identically zero
    pos = difference_kernel(make_params(3, 1.0), 1.0, 1.0, 1.0, 1.0).value
    neg = difference_kernel(make_params(3, -0.2), 1.0, 1.0, 1.0, 1.0).value
    assert pos != 0 and neg != 0 and np.sign(pos) != np.sign(neg)


def test_bound_scan_small_grid():
    grid = ScanGrid(n=12)
    rep = bound_ratio_scan("mszz_heat", make_params(3, 1.0), grid=grid)
    assert math.isfinite(rep.sup_ratio) and rep.sup_ratio > 0
    assert rep.as_dict()["grid"]["points_per_axis"] == 12
    rep0 = bound_ratio_scan("difference_a_pos", make_params(3, 0.0), grid=grid)
    assert rep0.sup_ratio == 0.0 and rep0.stable
    with pytest.raises(ValueError):
        bound_ratio_scan("difference_a_neg", make_params(3, 1.0), grid=grid)
    with pytest.raises(ValueError):
        bound_ratio_scan("nope", make_params(3, 1.0))


def test_bound_scan_tight_constant_fails_large():
    # with c far too small the Gaussian factor cannot dominate the kernel
    rep = bound_ratio_scan("mszz_heat", make_params(3, 1.0), c=0.5, grid=ScanGrid(n=12))
    assert rep.sup_ratio > 1e3


def test_offdiagonal_check():
    p = make_params(3, 1.0)
    val = offdiagonal_check(p, 0.5, (0.0, 1.0), (2.0, 3.0), 2.0, 2.0, lambda r: np.ones_like(r))
    assert 0 < val < 10
    far = offdiagonal_check(p, 0.5, (0.0, 1.0), (6.0, 7.0), 2.0, 2.0, lambda r: np.ones_like(r))
    assert far < 10
    with pytest.raises(ExponentWindowError):
        offdiagonal_check(make_params(3, -0.2), 0.5, (0.0, 1.0), (2.0, 3.0), 1.0, 2.0,
                          lambda r: np.ones_like(r))
    with pytest.raises(ValueError):
        offdiagonal_check(p, 0.5, (0.0, 2.0), (1.0, 3.0), 2.0, 2.0, lambda r: np.ones_like(r))


def test_potential_convolution_plateau():
    out = potential_convolution_check(3, 4.0)
    assert math.isfinite(out["sup"]) and out["refinement_drift"] < 1e-6
    assert out["edge_value"] == pytest.approx(out["plateau"], rel=0.05)


@settings(max_examples=60, deadline=None)
@given(r=st.floats(1e-3, 20), rho=st.floats(1e-3, 20), t=st.floats(1e-2, 50),
       lam=st.floats(0.1, 10), a=st.floats(-0.25, 10))
def test_heat_kernel_scaling_symmetry_positivity(r, rho, t, lam, a):
    p = make_params(3, a)
    k = radial_heat_kernel(p, t, r, rho)
    assert k >= 0
    assert radial_heat_kernel(p, t, rho, r) == pytest.approx(k, rel=1e-12, abs=1e-300)
    scaled = radial_heat_kernel(p, lam ** 2 * t, lam * r, lam * rho)
    assert scaled == pytest.approx(lam ** -3 * k, rel=1e-9, abs=1e-300)
