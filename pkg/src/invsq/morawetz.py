"""Morawetz weight calculus and flow-level checks for radial data.

The weight is ``psi(r) = int_0^r s^eps / (1 + s^eps) ds``.  Flows are
``e^{itL}`` (Schrodinger) and ``e^{it L^{1/2}}`` (wave), applied as phases
in the transform variable.  Space-time integrals over ``t in R`` are
evaluated exactly by Plancherel in time:

    int_R |int e^{it Omega(lam)} F(lam) dlam|^2 dt = 2 pi int |F|^2 / Omega'(lam) dlam,

which turns each smoothing estimate into a weighted integral of
``|f^(lam)|^2`` against a radial profile ``H(lam)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import erfc, hyp2f1, jv

from .hankel import (
    GridConfig, HankelPlan, PlanConfig, RadialFunction, build_plan, composite_rule, sphere_area,
)
from .spectrum import ModelParams, ParameterError, smoothing_admissible

ESTIMATES = ("firstest", "secondest", "thirdest")
FLOWS = ("schrodinger", "wave")


class StencilUnderflowError(ValueError):
    """The time step is below what double precision can difference."""


class AdmissibilityError(ValueError):
    pass


class DriftError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# weight calculus


def _contour_derivatives(g: Callable, z: np.ndarray, kmax: int, frac: float = 0.25,
                         n: int = 64) -> list:
    """Derivatives ``g^(k)(z)``, ``k = 0..kmax``, by the trapezoid rule on a circle.

    ``g`` must be analytic on the closed disc of radius ``frac * |z|`` about
    each ``z``; the rule then converges geometrically in ``n``.
    """
    z = np.asarray(z, complex)
    theta = 2 * np.pi * np.arange(n) / n
    rho = frac * np.abs(z)
    pts = z[..., None] + rho[..., None] * np.exp(1j * theta)
    vals = g(pts)
    out = []
    for k in range(kmax + 1):
        ck = np.mean(vals * np.exp(-1j * k * theta), axis=-1) / rho ** k
        out.append(math.factorial(k) * ck)
    return out


@dataclass(frozen=True)
class PsiCalculus:
    """Closed forms for the Morawetz weight and its derivatives."""

    eps: float

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError("need 0 < eps < 1")

    def psi(self, r) -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, float))
        e = self.eps
        return np.array([quad(lambda s: s ** e / (1 + s ** e), 0.0, x, limit=200)[0] for x in r])

    def dpsi(self, r):
        x = np.asarray(r) ** self.eps
        return x / (1 + x)

    def d2psi(self, r):
        r = np.asarray(r)
        x = r ** self.eps
        return self.eps * x / r / (1 + x) ** 2

    def lap_psi(self, r, d: int):
        r = np.asarray(r)
        return self.d2psi(r) + (d - 1) * self.dpsi(r) / r

    def beta(self, x, d: int):
        """``beta`` from its expansion; the argument is ``r^eps`` in the bilaplacian."""
        x = np.asarray(x, float)
        e = self.eps
        two_beta = (-(d * d - 6 * d + 7) / (1 + x) + e * (2 * d - 5) * (x * x - 1) / (1 + x) ** 3
                    - e * e * (x * x - 4 * x + 1) / (1 + x) ** 3)
        return 0.5 * two_beta

    def neg_half_bilap(self, r, d: int):
        """``-(1/2) Delta^2 psi`` via ``(1/r^3) psi' [mu_d/2 + eps beta(r^eps)]``."""
        r = np.asarray(r, float)
        mu = (d - 1) * (d - 3)
        return self.dpsi(r) / r ** 3 * (mu / 2 + self.eps * self.beta(r ** self.eps, d))

    def bilap_numeric(self, r, d: int) -> np.ndarray:
        """``Delta^2 psi`` by nested numerical differentiation of ``psi'``.

        ``Delta psi = (psi')' + (d-1) psi'/r`` and
        ``Delta^2 psi = (Delta psi)'' + (d-1) (Delta psi)'/r``, each derivative
        taken by contour quadrature of the principal-branch extension.
        """
        e = self.eps

        def dpsi_c(z):
            x = z ** e
            return x / (1 + x)

        def lap_c(z):
            g0, g1 = _contour_derivatives(dpsi_c, z, 1)
            return g1 + (d - 1) * g0 / z

        r = np.asarray(r, float)
        _, l1, l2 = _contour_derivatives(lap_c, r.astype(complex), 2)
        return (l2 + (d - 1) * l1 / r).real

    def w(self, r):
        """``w_eps(r) = r^(eps-1) / (1 + r^eps)^2``."""
        r = np.asarray(r, float)
        x = r ** self.eps
        return x / r / (1 + x) ** 2

    def v(self, r):
        """``r^(eps-3) / (1 + r^eps)``, the zeroth-order weight."""
        r = np.asarray(r, float)
        x = r ** self.eps
        return x / r ** 3 / (1 + x)

    def w_head(self, R, q: float):
        """``int_0^R w_eps(r) r^q dr`` (needs ``q + eps > 0``)."""
        m = (self.eps + q) / self.eps
        X = np.asarray(R, float) ** self.eps
        return X ** m / m * hyp2f1(2.0, m, m + 1.0, -X) / self.eps

    def v_head(self, R, q: float):
        """``int_0^R r^(eps-3+q)/(1+r^eps) dr`` (needs ``q + eps > 2``)."""
        m = (self.eps - 2.0 + q) / self.eps
        X = np.asarray(R, float) ** self.eps
        return X ** m / m * hyp2f1(1.0, m, m + 1.0, -X) / self.eps

    def w_tail(self, R):
        """``int_R^inf w_eps(r) dr``."""
        return 1.0 / (self.eps * (1 + np.asarray(R, float) ** self.eps))

    def v_tail(self, R):
        """``int_R^inf r^(eps-3)/(1+r^eps) dr`` through a Gauss hypergeometric sum."""
        R = np.asarray(R, float)
        b = 2.0 / self.eps
        return 0.5 * R ** -2.0 * hyp2f1(1.0, b, b + 1.0, -R ** -self.eps)


def _default_r_grid():
    return np.geomspace(1e-6, 1e6, 500)


def check_beta_bound(d: int, eps: float, r_grid=None) -> tuple[float, bool]:
    """``max |beta(r^eps)|`` over the grid and whether it stays within ``3 d^2``."""
    r = _default_r_grid() if r_grid is None else np.asarray(r_grid, float)
    m = float(np.max(np.abs(PsiCalculus(eps).beta(r ** eps, d))))
    return m, m <= 3 * d * d


def check_lap_psi_bound(d: int, eps: float, r_grid=None) -> tuple[float, bool]:
    """``max r |Delta psi|`` over the grid and whether it stays within ``d``."""
    r = _default_r_grid() if r_grid is None else np.asarray(r_grid, float)
    m = float(np.max(r * np.abs(PsiCalculus(eps).lap_psi(r, d))))
    return m, m <= d


# ---------------------------------------------------------------------------
# flows


def _phase(flow: str, t: float):
    if flow == "schrodinger":
        return lambda lam: np.exp(1j * t * lam ** 2)
    if flow == "wave":
        return lambda lam: np.exp(1j * t * lam)
    raise ValueError(f"flow must be one of {FLOWS}")


def evolve(params: ModelParams, f, t: float, flow: str = "schrodinger",
           plan: HankelPlan | None = None) -> RadialFunction:
    """``e^{itL} f`` or ``e^{it L^{1/2}} f`` on the plan's radial grid."""
    plan = plan or build_plan(params)
    return plan.inverse(_phase(flow, t)(plan.lam) * plan.forward(f))


# ---------------------------------------------------------------------------
# conservation


@dataclass
class ConservationReport:
    s: float
    times: list
    operator_norms: list
    operator_spread: float
    laplacian_norms: list
    resolved: list
    corridor: float
    corridor_bound: float | None
    ok: bool

    def as_dict(self) -> dict:
        return asdict(self)


def conservation_check(params: ModelParams, s: float, f, t_list: Sequence[float],
                       plan: HankelPlan | None = None, corridor_bound: float | None = None,
                       mass_tol: float = 1e-8) -> ConservationReport:
    """Conservation of ``||L^{s/2} u(t)||`` and the ``(-Delta)^{s/2}`` corridor.

    The ``L`` norm is taken in the transform variable, where the flow is a
    unimodular phase.  The free-Laplacian norm needs ``u(t)`` in physical
    space, so it is only reported at times whose evolved mass is still
    captured by the radial grid to ``mass_tol`` (``resolved``).
    ``corridor`` is max/min of those free norms; when ``corridor_bound``
    (the product of the two equivalence constants at ``p = 2``) is given,
    ``ok`` also requires ``corridor <= corridor_bound``.
    """
    if not 0 < s < 2:
        raise ValueError("need 0 < s < 2")
    plan = plan or build_plan(params)
    free = build_plan(params, params.kappa)
    fhat = plan.forward(f)
    nf = plan.radial_l2(f)
    op, lap, resolved = [], [], []
    for t in t_list:
        g = _phase("schrodinger", t)(plan.lam) * fhat
        op.append(plan.spectral_l2(plan.lam ** s * g))
        u = plan.inverse(g)
        ok_mass = abs(plan.radial_l2(u) / nf - 1.0) <= mass_tol
        resolved.append(bool(ok_mass))
        lap.append(free.spectral_l2(free.lam ** s * free.forward(u)) if ok_mass else math.nan)
    op_arr = np.array(op)
    spread = float((op_arr.max() - op_arr.min()) / op_arr.max())
    good = [x for x in lap if math.isfinite(x)]
    corridor = max(good) / min(good) if good else math.nan
    ok = spread <= 1e-8
    if corridor_bound is not None and good:
        ok = ok and corridor <= corridor_bound
    return ConservationReport(float(s), list(map(float, t_list)), list(map(float, op)), spread,
                              list(map(float, lap)), resolved, float(corridor), corridor_bound, ok)


# ---------------------------------------------------------------------------
# virial identity


@dataclass
class VirialReport:
    eps: float
    t0: float
    dt: float
    dtheta: float
    rhs: float
    residual: float
    theta: list

    def as_dict(self) -> dict:
        return asdict(self)


def _stencil(vals: Sequence[float], dt: float) -> float:
    fm2, fm1, _, fp1, fp2 = vals
    return (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * dt)


def verify_virial(params: ModelParams, eps: float, f, t0: float, dt: float | None = None,
                  plan: HankelPlan | None = None, tol: float = 1e-9) -> VirialReport:
    """Residual of the integrated radial virial identity at ``t0``.

    ``u`` solves ``i u_t + Delta u - (a/|x|^2) u = 0``, i.e. ``u(t) = e^{-itL} f``.
    ``Theta(t) = Im int conj(u) psi' d_r u dx`` is differenced with a 5-point
    stencil and compared with
    ``int [2 psi'' |d_r u|^2 - (1/2) Delta^2 psi |u|^2 + 2 a psi' |u|^2 / r^3] dx``.
    With ``dt=None`` the step is halved from 0.02 until two successive
    stencils agree to ``tol`` relative to the right side scale.
    """
    d = params.d
    if eps + 2 * params.nu0 <= 1:
        raise ParameterError("virial terms are not integrable at the origin for eps + 2 nu0 <= 1")
    plan = plan or build_plan(params)
    calc = PsiCalculus(eps)
    r = plan.r
    W = sphere_area(d) * plan.radial.quad_weights
    fhat = plan.forward(f)
    wl = plan.spectral.quad_weights
    p1, p2 = calc.dpsi(r), calc.d2psi(r)
    nb = calc.neg_half_bilap(r, d)
    pot = 2 * params.a * p1 / r ** 3

    def fields(t):
        c = wl * np.exp(-1j * t * plan.lam ** 2) * fhat
        return plan.phi @ c, plan.dphi @ c

    def theta(t):
        u, du = fields(t)
        return float(np.dot(W, (np.conj(u) * p1 * du).imag))

    u0, du0 = fields(t0)
    rhs = float(np.dot(W, 2 * p2 * np.abs(du0) ** 2 + (nb + pot) * np.abs(u0) ** 2))
    mass = float(np.dot(W, np.abs(plan._values(f)) ** 2))
    scale = abs(rhs) + mass

    def diff(h):
        vals = [theta(t0 + k * h) for k in (-2, -1, 0, 1, 2)]
        theta_scale = max(abs(v) for v in vals) + mass
        if 1e-16 * theta_scale / h > 1e-3 * tol * scale:
            raise StencilUnderflowError(f"dt={h:g} too small: rounding dominates the stencil")
        return _stencil(vals, h), vals

    if dt is not None:
        dth, vals = diff(dt)
        h = dt
    else:
        h = 0.02
        prev, vals = diff(h)
        for _ in range(12):
            h /= 2
            dth, vals = diff(h)
            if abs(dth - prev) <= tol * scale:
                break
            prev = dth
    res = abs(dth - rhs) / scale
    return VirialReport(float(eps), float(t0), float(h), float(dth), rhs, float(res), vals)


# ---------------------------------------------------------------------------
# smoothing estimates

_PROFILE_Z = 64.0       # matching radius for numerically computed profiles
_BESSEL_Z = 1024.0      # matching radius for closed-form Bessel profiles
_WINDOW_EDGE, _WINDOW_WIDTH, _WINDOW_RMAX = 90.0, 6.0, 120.0


@dataclass
class SmoothingReport:
    estimate_id: str
    params: dict
    eps: float
    T: float
    lhs: float
    rhs: float
    ratio: float
    drift: float
    member: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return math.isfinite(self.ratio) and self.ratio >= 0 and self.drift < 0.05

    def as_dict(self) -> dict:
        out = asdict(self)
        out["T"] = "inf" if math.isinf(self.T) else self.T
        out["valid"] = self.valid
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2)


@lru_cache(maxsize=8)
def _quarter_profile(d: int, nu0: float, kappa: float):
    """``Psi(z) = (-Delta)^{1/4}[z^-kappa J_nu0(z)]`` on ``z <= _PROFILE_Z``.

    Evaluated on a windowed order-``kappa`` plan; the window sits far enough
    out that its edge does not reach the matching radius.
    """
    from .spectrum import make_params

    params = make_params(d, nu0 ** 2 - kappa ** 2)
    plan = build_plan(params, kappa, PlanConfig(r_max=_WINDOW_RMAX), self_test=False)
    z = plan.r
    h = z ** (-kappa) * jv(nu0, z) * 0.5 * erfc((z - _WINDOW_EDGE) / _WINDOW_WIDTH)
    vals = plan.inverse_values(np.sqrt(plan.lam) * plan.forward(h)).real
    keep = z <= _PROFILE_Z
    return z[keep], plan.radial.quad_weights[keep], vals[keep]


@lru_cache(maxsize=4)
def _bessel_zgrid(d: int, Z: float):
    z, wz = composite_rule(GridConfig(1e-8, Z, 2.5), d)
    return z, wz


def _bessel_profile(kind: str, d: int, nu: float, z: np.ndarray) -> np.ndarray:
    kappa = (d - 2) / 2
    if kind == "value":
        return (z ** -kappa * jv(nu, z)) ** 2
    jp = nu / z * jv(nu, z) - jv(nu + 1, z)
    return (z ** -kappa * (jp - kappa / z * jv(nu, z))) ** 2


def _profile_integral(lam, z, wz, prof, d: int, weight: Callable, tail: Callable,
                      head: Callable, power: float, Z: float) -> np.ndarray:
    """``lam^power int_0^inf W(z/lam) P(z) z^{d-1} dz`` with both ends closed off.

    Beyond ``Z`` the profile ``z^{d-1} P(z)`` is replaced by its mean ``1/pi``;
    below the first node it is continued as the power law ``c z^q`` through
    the first two nodes and integrated against ``W`` exactly.
    """
    g0, g1 = prof[0] * z[0] ** (d - 1), prof[1] * z[1] ** (d - 1)
    fit = g0 > 0 and g1 > 0
    q = math.log(g1 / g0) / math.log(z[1] / z[0]) if fit else 0.0
    c = g0 / z[0] ** q if fit else 0.0
    out = np.empty(len(lam))
    for j, lj in enumerate(lam):
        near = np.dot(wz, weight(z / lj) * prof)
        lo = c * lj ** (q + 1) * head(z[0] / lj, q) if fit else 0.0
        out[j] = lj ** power * (near + lo) + lj ** (power + 1) * tail(Z / lj) / math.pi
    return out


def _flow_density(plan: HankelPlan, fhat: np.ndarray, flow: str) -> np.ndarray:
    """``2 pi |f^|^2 lam^{d-1} w_j / Omega'(lam)``: time-integrated spectral density."""
    dom = 2 * plan.lam if flow == "schrodinger" else np.ones_like(plan.lam)
    return 2 * math.pi * np.abs(fhat) ** 2 * plan.lam ** (plan.d - 1) * plan.spectral.quad_weights / dom


def _profiles(estimate_id: str, params: ModelParams, eps: float, lam: np.ndarray, scale: float):
    """Radial factor ``H(lam)`` for the estimate at matching radius ``scale * Z``."""
    d, nu = params.d, params.nu0
    calc = PsiCalculus(eps)
    if estimate_id == "secondest":
        Z = _PROFILE_Z * scale
        z, wz, psi = _quarter_profile(d, nu, params.kappa)
        keep = z <= Z
        return _profile_integral(lam, z[keep], wz[keep], psi[keep] ** 2, d, calc.w, calc.w_tail,
                                 calc.w_head, 1.0 - d, Z)
    Z = _BESSEL_Z * scale
    z, wz = _bessel_zgrid(d, Z)
    third = estimate_id == "thirdest"
    H = _profile_integral(lam, z, wz, _bessel_profile("value", d, nu, z), d,
                          calc.w if third else calc.v, calc.w_tail if third else calc.v_tail,
                          calc.w_head if third else calc.v_head, -float(d), Z)
    if estimate_id == "firstest":
        H = H + _profile_integral(lam, z, wz, _bessel_profile("deriv", d, nu, z), d, calc.w,
                                  calc.w_tail, calc.w_head, 2.0 - d, Z)
    return H


def _lhs(estimate_id, params, eps, plan, fhat, scale):
    flow = "wave" if estimate_id == "thirdest" else "schrodinger"
    dens = _flow_density(plan, fhat, flow)
    live = dens > 1e-300 * max(dens.max(), 1e-300)
    H = np.zeros_like(dens)
    if live.any():
        H[live] = _profiles(estimate_id, params, eps, plan.lam[live], scale)
    total = sphere_area(params.d) * float(np.dot(dens, H))
    return total if estimate_id == "firstest" else math.sqrt(total)


def smoothing_estimate(estimate_id: str, params: ModelParams, eps: float, f,
                       plan: HankelPlan | None = None, member: int | None = None,
                       drift_tol: float = 0.05, strict: bool = False,
                       check: bool = True) -> SmoothingReport:
    """Both sides of one smoothing estimate, with the time integral over all of ``R``.

    ``firstest``: ``int int [w_eps |d_r u|^2 + |x|^(eps-3)/(1+|x|^eps) |u|^2]``
    against ``eps^-1 ||(-Delta)^{1/4} f||^2``.  ``secondest`` and ``thirdest``:
    ``||w_eps^{1/2} (-Delta)^{1/4} e^{itL} f||`` and ``||w_eps^{1/2} e^{it L^{1/2}} f||``
    against ``eps^-1/2 ||f||``.  ``drift`` compares the radial profiles
    matched to their far-field mean at ``Z`` and at ``2 Z``.  ``check=False``
    skips the admissibility test (the space-time integral itself is defined
    whenever it converges).
    """
    if estimate_id not in ESTIMATES:
        raise ValueError(f"estimate_id must be one of {ESTIMATES}")
    adm = smoothing_admissible(params, eps) if check else True
    if not adm:
        raise AdmissibilityError(f"smoothing estimates not admissible at eps={eps}: {adm.details}")
    plan = plan or build_plan(params)
    fhat = plan.forward(f)
    lhs_half = _lhs(estimate_id, params, eps, plan, fhat, 0.5)
    lhs = _lhs(estimate_id, params, eps, plan, fhat, 1.0)
    drift = abs(lhs - lhs_half) / lhs if lhs > 0 else 0.0
    if estimate_id == "firstest":
        free = build_plan(params, params.kappa)
        rhs = free.spectral_l2(np.sqrt(free.lam) * free.forward(f)) ** 2 / eps
    else:
        rhs = plan.radial_l2(f) / math.sqrt(eps)
    ratio = lhs / rhs if rhs > 0 else 0.0
    if strict and drift >= drift_tol:
        raise DriftError(f"matching-radius drift {drift:.3f} exceeds {drift_tol}")
    Z = _PROFILE_Z if estimate_id == "secondest" else _BESSEL_Z
    return SmoothingReport(estimate_id, params.as_dict(), float(eps), math.inf, float(lhs),
                           float(rhs), float(ratio), float(drift), member,
                           extra={"matching_radius": Z, "time_integral": "Plancherel over R",
                                  "flow": "wave" if estimate_id == "thirdest" else "schrodinger"})


def time_slices(params: ModelParams, eps: float, f, times: Sequence[float],
                plan: HankelPlan | None = None) -> list:
    """``(t, int [w |d_r u|^2 + v |u|^2] dx)`` over ``r <= r_max`` for plotting."""
    plan = plan or build_plan(params)
    calc = PsiCalculus(eps)
    W = sphere_area(params.d) * plan.radial.quad_weights
    fhat = plan.forward(f)
    rows = []
    for t in times:
        c = plan.spectral.quad_weights * np.exp(1j * t * plan.lam ** 2) * fhat
        u, du = plan.phi @ c, plan.dphi @ c
        rows.append((float(t), float(np.dot(W, calc.w(plan.r) * np.abs(du) ** 2
                                           + calc.v(plan.r) * np.abs(u) ** 2))))
    return rows


# ---------------------------------------------------------------------------
# bilinear form


@dataclass
class BFormReport:
    value: complex
    hv: float
    hw: float
    ratio: float

    def as_dict(self) -> dict:
        return {"re": self.value.real, "im": self.value.imag, "hv": self.hv, "hw": self.hw,
                "ratio": self.ratio}


def h_half_norm(plan_free: HankelPlan, v) -> float:
    """``||(-Delta)^{1/4} v||_2`` on an order-``(d-2)/2`` plan."""
    return plan_free.spectral_l2(np.sqrt(plan_free.lam) * plan_free.forward(v))


def bform_check(eps: float, v, w, plan_free: HankelPlan) -> BFormReport:
    """``|B(v, w)| / (||v||_{1/2} ||w||_{1/2})`` with ``B = int conj(v) psi' d_r w dx``."""
    calc = PsiCalculus(eps)
    vv, ww = plan_free._values(v), plan_free._values(w)
    dw = plan_free.dphi @ (plan_free.spectral.quad_weights * plan_free.forward(ww))
    W = sphere_area(plan_free.d) * plan_free.radial.quad_weights
    B = complex(np.dot(W, np.conj(vv) * calc.dpsi(plan_free.r) * dw))
    hv, hw = h_half_norm(plan_free, vv), h_half_norm(plan_free, ww)
    return BFormReport(B, hv, hw, abs(B) / (hv * hw) if hv * hw > 0 else 0.0)
