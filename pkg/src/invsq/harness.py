"""Randomized verification of the weighted inequalities on radial data.

Each verifier evaluates both sides of an inequality for every member of a
seeded family of band-limited radial functions and reports the extremal
ratio in a :class:`Certificate`.  Fractional powers are always computed twice
(spectral multiplier and heat subordination) and must agree before a ratio is
accepted.
"""
from __future__ import annotations

import datetime as _dt
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import __version__
from scipy.special import erfc as _erfc

from .hankel import (
    GridConfig, HankelPlan, PlanConfig, RadialFunction, RadialGrid, basis, build_plan,
    composite_rule, fractional_power_spectral, fractional_power_subordination, sphere_area,
    weighted_lp_norm,
)
from .spectrum import (
    INF, ModelParams, WeightSpec, make_params, weight_admissible, window,
)

SCHEMA = "certificate_v1"
SCOPE = "radial sector"
DEFAULT_THRESHOLD = 1e3
ROUTE_TOL = 1e-6


class WindowViolationError(ValueError):
    pass


class WeightInadmissibleError(ValueError):
    pass


class RouteDisagreementError(RuntimeError):
    pass


class TailDivergenceError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# test families


@dataclass(frozen=True)
class Component:
    c: complex
    m: int
    gamma: float
    b: float

    def __call__(self, r):
        return self.c * r ** self.m * np.exp(-self.gamma * (r - self.b) ** 2)


@dataclass(frozen=True)
class MemberSpec:
    components: tuple

    def __call__(self, r):
        r = np.asarray(r, float)
        return sum(comp(r) for comp in self.components)

    @property
    def min_power(self) -> int:
        return min(c.m for c in self.components)

    def as_dict(self) -> list:
        return [{"c": [c.c.real, c.c.imag], "m": c.m, "gamma": c.gamma, "b": c.b}
                for c in self.components]


@dataclass
class TestFamily:
    seed: int
    specs: list
    members: list
    plan: HankelPlan
    rejected: int = 0

    __test__ = False  # not a pytest class

    @property
    def size(self) -> int:
        return len(self.members)

    def on_plan(self, plan: HankelPlan) -> list:
        """Re-sample the same members on another plan's grid."""
        return [RadialFunction(plan.radial, s(plan.r)) for s in self.specs]


def _band_limited(plan: HankelPlan, f: np.ndarray, tol: float, lam_cut: float | None = None,
                  r_cut: float | None = None) -> bool:
    fh = np.abs(plan.forward(f))
    cut = plan.lam > (lam_cut or 0.8 * plan.spectral.lambda_max)
    if not np.any(cut) or fh.max() == 0:
        return False
    rcut = plan.r > (r_cut or 0.8 * plan.radial.r_max)
    return bool(fh[cut].max() < tol * fh.max() and np.abs(f[rcut]).max() < tol * np.abs(f).max())


def make_family(params: ModelParams, seed: int, size: int = 40,
                plans: Sequence[HankelPlan] | None = None, max_components: int = 3,
                band_tol: float = 1e-10, gamma_range: tuple = (0.2, 20.0),
                b_range: tuple = (0.0, 10.0), lam_cut: float | None = None,
                r_cut: float | None = None) -> TestFamily:
    """Seeded family ``sum_j c_j r^m_j exp(-gamma_j (r - b_j)^2)``.

    Candidates are rejected unless their norm lies in ``[1e-6, 1e6]`` and
    their transform on every plan in ``plans`` is below ``band_tol`` times its
    peak beyond ``lam_cut`` (default ``0.8 lambda_max``), and likewise in
    space beyond ``r_cut`` (default ``0.8 r_max``).  Flow checks use a
    smaller ``gamma_range`` and ``lam_cut`` so that evolved members stay
    resolved on the grids.
    """
    plans = list(plans) if plans else [build_plan(params)]
    rng = np.random.default_rng(seed)
    specs, members, rejected = [], [], 0
    base = plans[0]
    while len(members) < size:
        if rejected > 200 * size:
            raise RuntimeError("test family rejection rate too high for these grids")
        k = int(rng.integers(1, max_components + 1))
        comps = []
        for _ in range(k):
            rad = math.sqrt(rng.uniform(0.0, 1.0))
            ang = rng.uniform(0.0, 2 * math.pi)
            comps.append(Component(complex(rad * math.cos(ang), rad * math.sin(ang)),
                                   int(rng.integers(0, 3)), float(rng.uniform(*gamma_range)),
                                   float(rng.uniform(*b_range))))
        spec = MemberSpec(tuple(comps))
        vals = spec(base.r)
        nrm = base.radial_l2(vals)
        if not 1e-6 <= nrm <= 1e6 or not all(
                _band_limited(p, spec(p.r), band_tol, lam_cut, r_cut) for p in plans):
            rejected += 1
            continue
        specs.append(spec)
        members.append(RadialFunction(base.radial, vals))
    return TestFamily(seed, specs, members, base, rejected)


# ---------------------------------------------------------------------------
# certificates


@dataclass
class Certificate:
    inequality_id: str
    params: dict
    window: dict
    family: dict
    max_ratio: float
    argmax: int
    norms: list
    grid: dict
    refinement_drift: float
    threshold: float
    trajectory: list
    passed: bool = False
    extra: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    timestamp: str = ""

    def __post_init__(self):
        self.passed = bool(math.isfinite(self.max_ratio) and self.max_ratio <= self.threshold
                           and self.refinement_drift < 0.05)
        if not self.timestamp:
            self.timestamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")

    @property
    def saturated(self) -> bool:
        """Growth of the running max over the second half of the family < 10%."""
        traj = self.trajectory
        if not traj or traj[-1] == 0:
            return True
        mid = traj[len(traj) // 2]
        return (traj[-1] - mid) <= 0.1 * max(mid, 1e-300)

    def as_dict(self, include_timestamp: bool = True) -> dict:
        out = {"schema": SCHEMA, "version": __version__, "scope": SCOPE,
               "inequality_id": self.inequality_id, "params": self.params, "window": self.window,
               "family": self.family, "max_ratio": self.max_ratio, "argmax": self.argmax,
               "norms": self.norms, "grid": self.grid, "refinement_drift": self.refinement_drift,
               "threshold": self.threshold, "trajectory": self.trajectory, "pass": self.passed,
               "saturated": self.saturated, "extra": self.extra, "notes": self.notes}
        if include_timestamp:
            out["timestamp"] = self.timestamp
        return _jsonable(out)

    def to_json(self, include_timestamp: bool = True) -> str:
        return json.dumps(self.as_dict(include_timestamp), sort_keys=True, indent=2)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _trajectory(ratios: Sequence[float]) -> list:
    return [float(v) for v in np.maximum.accumulate(np.asarray(ratios, float))] if len(ratios) else []


def _param_block(params: ModelParams, **kw) -> dict:
    out = {"d": params.d, "a": params.a, "sigma": params.sigma, "nu0": params.nu0}
    out.update(kw)
    return out


def _weight_block(w: WeightSpec) -> str:
    return w.label()


# ---------------------------------------------------------------------------
# shared pieces


def _check_weight(w: WeightSpec, p: float, win, d: int, label: str = ""):
    rep = weight_admissible(w, p, win.ap_index, win.rh_index, d)
    if not rep:
        raise WeightInadmissibleError(f"weight {w.label()} not admissible {label}: {rep.details}")
    return rep


def fractional_power(plan: HankelPlan, f, s: float, route_tol: float = ROUTE_TOL):
    """``L^{s/2} f`` by both routes; returns the multiplier result and the discrepancy."""
    if not 0 < s < 2:
        raise ValueError("route-checked fractional powers need 0 < s < 2")
    a = fractional_power_spectral(plan, f, s, "positive")
    b = fractional_power_subordination(plan, f, s, "positive")
    scale = plan.radial_l2(a)
    err = plan.radial_l2(a.values - b.values) / scale if scale > 0 else 0.0
    if not err <= route_tol:
        raise RouteDisagreementError(f"multiplier and subordination differ by {err:.2e}")
    return a, float(err)


def _integrable_at_origin(spec: MemberSpec, s: float, p: float, w: WeightSpec, d: int) -> bool:
    """``|f|^p |x|^{-sp} w`` near 0 behaves like ``r^{m p - s p + alpha0}``."""
    alpha0 = w.envelope()[0]
    return spec.min_power * p - s * p + alpha0 + d > 0


def _refined(params: ModelParams, orders: Sequence[float], factor: float = 1.5) -> list:
    cfg = PlanConfig().scaled(factor)
    return [build_plan(params, o, cfg) for o in orders]


def _drift(a: float, b: float) -> float:
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(a), abs(b))


# ---------------------------------------------------------------------------
# Hardy


def _hardy_ratios(plan, members, specs, s, p, w, d):
    ratios, norms, route, excluded = [], [], 0.0, []
    for i, (f, spec) in enumerate(zip(members, specs)):
        if not _integrable_at_origin(spec, s, p, w, d):
            excluded.append(i)
            ratios.append(0.0)
            norms.append([math.nan, math.nan])
            continue
        lf, err = fractional_power(plan, f, s)
        route = max(route, err)
        lhs = weighted_lp_norm(RadialFunction(f.grid, f.values * f.r ** (-s)), w, p)
        rhs = weighted_lp_norm(lf, w, p)
        ratios.append(lhs / rhs)
        norms.append([lhs, rhs])
    return ratios, norms, route, excluded


def hardy_sharp_constant(params: ModelParams) -> float:
    """``((d-2)^2/4 + a)^{-1/2}``: sharp ``L^2`` bound of ``|x|^{-1} L^{-1/2}``."""
    return ((params.d - 2) ** 2 / 4.0 + params.a) ** -0.5


def verify_hardy(params: ModelParams, s: float, p: float, w: WeightSpec | None = None,
                 family: TestFamily | None = None, seed: int = 0, size: int = 40,
                 threshold: float | None = None, refine: bool = True) -> Certificate:
    """Extremal ``|| |x|^{-s} f ||_{L^p_w} / || L^{s/2} f ||_{L^p_w}`` over a family."""
    w = w or WeightSpec.constant()
    d = params.d
    win = window(params, s, "hardy")
    if not win.valid:
        raise WindowViolationError(win.reason)
    if not win.contains(p):
        raise WindowViolationError(f"p={p} outside ({win.p_lower:g}, {win.p_upper:g})")
    wrep = _check_weight(w, p, win, d)
    family = family or make_family(params, seed, size)
    plan = family.plan
    ratios, norms, route, excluded = _hardy_ratios(plan, family.members, family.specs, s, p, w, d)
    i = int(np.argmax(ratios))
    sharp = s == 1 and p == 2 and w.is_constant and (params.d - 2) ** 2 / 4.0 + params.a > 0
    if threshold is None:
        threshold = hardy_sharp_constant(params) + 1e-6 if sharp else DEFAULT_THRESHOLD
    drift = 0.0
    if refine:
        (rp,) = _refined(params, [params.nu0])
        r2, _, _, _ = _hardy_ratios(rp, family.on_plan(rp), family.specs, s, p, w, d)
        drift = _drift(max(ratios), max(r2))
    notes = []
    if excluded:
        notes.append(f"members {excluded} excluded: |x|^(-sp) w |f|^p not integrable at 0")
    if sharp:
        notes.append("threshold is the sharp quadratic-form constant plus 1e-6")
    return Certificate(
        "hardy", _param_block(params, s=s, p=p, weight=_weight_block(w)), win.as_dict(),
        {"seed": family.seed, "size": family.size, "rejected": family.rejected},
        float(ratios[i]), i, norms, _grid_block(plan), drift, float(threshold),
        _trajectory(ratios),
        extra={"route_discrepancy": route, "weight_check": wrep.method,
               "sharp_constant": hardy_sharp_constant(params) if sharp else None},
        notes=notes)


def _grid_block(plan: HankelPlan) -> dict:
    return {"plan": json.loads(plan.config.to_json()), "radial_nodes": plan.radial.size,
            "spectral_nodes": plan.spectral.size, "refinement_factor": 1.5,
            "roundtrip_error": plan.roundtrip_error}


# ---------------------------------------------------------------------------
# equivalence of fractional powers


def _equiv_ratios(plan_a, plan_0, members, s, p, w):
    fwd, rev, norms, route = [], [], [], 0.0
    for f in members:
        la, e1 = fractional_power(plan_a, f, s)
        g = RadialFunction(plan_0.radial, f.values)
        l0, e2 = fractional_power(plan_0, g, s)
        route = max(route, e1, e2)
        na, n0 = weighted_lp_norm(la, w, p), weighted_lp_norm(l0, w, p)
        fwd.append(n0 / na)
        rev.append(na / n0)
        norms.append([n0, na])
    return fwd, rev, norms, route


def verify_equivalence(params: ModelParams, s: float, p: float, w: WeightSpec | None = None,
                       family: TestFamily | None = None, seed: int = 0, size: int = 40,
                       threshold: float = DEFAULT_THRESHOLD, refine: bool = True) -> Certificate:
    """Both directions of ``||(-Delta)^{s/2} f|| ~ ||L^{s/2} f||`` in ``L^p_w``.

    ``max_ratio`` is the larger of the in-scope directions; both ratios and
    their scope are kept in ``extra``.
    """
    w = w or WeightSpec.constant()
    d = params.d
    kappa = params.kappa
    wins = {"forward": window(params, s, "equiv_forward"), "reverse": window(params, s, "equiv_reverse")}
    scope = {}
    for name, win in wins.items():
        ok = win.valid and win.contains(p)
        if ok:
            ok = bool(weight_admissible(w, p, win.ap_index, win.rh_index, d))
        scope[name] = ok
    if not any(scope.values()):
        raise WindowViolationError(f"p={p} with weight {w.label()} is outside both windows")
    plan_a = build_plan(params)
    plan_0 = build_plan(params, kappa)
    family = family or make_family(params, seed, size, [plan_a, plan_0])
    fwd, rev, norms, route = _equiv_ratios(plan_a, plan_0, family.members, s, p, w)
    in_scope = [r for name, r in (("forward", fwd), ("reverse", rev)) if scope[name]]
    combined = np.max(np.array(in_scope), axis=0)
    i = int(np.argmax(combined))
    drift = 0.0
    if refine:
        ra, r0 = _refined(params, [params.nu0, kappa])
        f2, v2, _, _ = _equiv_ratios(ra, r0, family.on_plan(ra), s, p, w)
        in2 = [r for name, r in (("forward", f2), ("reverse", v2)) if scope[name]]
        drift = _drift(float(combined.max()), float(np.max(in2)))
    return Certificate(
        "equivalence", _param_block(params, s=s, p=p, weight=_weight_block(w)),
        {k: v.as_dict() for k, v in wins.items()},
        {"seed": family.seed, "size": family.size, "rejected": family.rejected},
        float(combined[i]), i, norms, _grid_block(plan_a), drift, float(threshold),
        _trajectory(combined),
        extra={"forward_max": float(max(fwd)), "reverse_max": float(max(rev)),
               "directions_in_scope": scope, "route_discrepancy": route})


# ---------------------------------------------------------------------------
# square functions


FAR_RADIUS = 400.0
FAR_CUT = 2.0     # low-pass cutoff chi(lam) = erfc((lam - FAR_CUT) / FAR_WIDTH) / 2
FAR_WIDTH = 0.5
FAR_BAND = 5.5    # chi < 1e-17 beyond this


@dataclass
class TimeRule:
    """Trapezoid rule in ``log t`` compressed by an SVD of the multiplier table."""

    log_t: np.ndarray
    step: float
    basis: np.ndarray  # (n_lambda, rank): left factors scaled by singular values
    tail_fraction: np.ndarray
    kind: str = "alpha"
    param: float = 0.5
    far_cache: dict = field(default_factory=dict, repr=False)

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def table(self, lam: np.ndarray) -> np.ndarray:
        """``sqrt(h) m(t_k, lam_j)`` as an ``(n_lambda, n_t)`` array."""
        t = np.exp(self.log_t)
        return math.sqrt(self.step) * square_multiplier(self.kind, self.param)(t[None, :], lam[:, None])


def square_multiplier(kind: str, param: float):
    """``m(t, lam)`` for the ``alpha`` square function or the ``s`` variant."""
    if kind == "alpha":
        e = 1.0 - param
        return lambda t, lam: (t * lam ** 2) ** e * np.exp(-t * lam ** 2)
    if kind == "s":
        return lambda t, lam: t ** (-param / 2.0) * (t * lam ** 2) * np.exp(-t * lam ** 2)
    raise ValueError("kind must be 'alpha' or 's'")


def square_scalar(kind: str, param: float) -> float:
    """``int_0^inf m(t, lam)^2 dt/t`` at ``lam = 1`` in closed form."""
    if kind == "alpha":
        e = 2.0 * (1.0 - param)
        return math.gamma(e) * 2.0 ** (-e)
    e = 2.0 - param
    return math.gamma(e) * 2.0 ** (-e)


def _compress(table: np.ndarray, rank_tol: float) -> np.ndarray:
    U, S, _ = np.linalg.svd(table, full_matrices=False)
    if S[0] == 0:
        return np.zeros((table.shape[0], 0))
    rank = int(np.sum(S > rank_tol * S[0]))
    return U[:, :rank] * S[:rank]


def time_rule(plan: HankelPlan, kind: str, param: float, step: float = 0.14,
              tol: float = 1e-16, rank_tol: float = 1e-13) -> TimeRule:
    """Log-t nodes covering the spectral grid, with an SVD-compressed table.

    The square integral is ``sum_k h |sum_j phi_j w_j m(t_k, lam_j) f^_j|^2``;
    writing ``sqrt(h) m = U S V^T`` and dropping the orthogonal ``V`` leaves
    ``sum_q |sum_j phi_j w_j (U S)_jq f^_j|^2``.
    """
    rate = 2.0 * (1.0 - param) if kind == "alpha" else 2.0 - param
    u_lo = -2.0 * math.log(plan.spectral.lambda_max) + math.log(tol) / rate
    u_hi = -2.0 * math.log(plan.spectral.lambda_min) + math.log(-math.log(tol)) + 1.0
    n = int(math.ceil((u_hi - u_lo) / step))
    log_t = np.linspace(u_lo, u_lo + n * step, n + 1)
    rule = TimeRule(log_t, step, np.zeros((plan.spectral.size, 0)), np.zeros(0), kind, float(param))
    table = rule.table(plan.lam)
    sq = table ** 2
    dec = math.log(10.0)
    ends = (log_t <= log_t[0] + dec) | (log_t >= log_t[-1] - dec)
    rule.tail_fraction = sq[:, ends].sum(axis=1) / sq.sum(axis=1)
    rule.basis = _compress(table, rank_tol)
    return rule


def low_pass(lam) -> np.ndarray:
    """Smooth cutoff that is 1 near ``lam = 0`` and below 1e-17 past ``FAR_BAND``."""
    return 0.5 * _erfc((np.asarray(lam, float) - FAR_CUT) / FAR_WIDTH)


@dataclass
class FarField:
    """Evaluation of the square function beyond the plan's radial range.

    The slowly decaying part of ``S f`` comes from small ``lam``; after a
    smooth low-pass the integrand is band-limited to ``FAR_BAND`` and a
    low-bandwidth spectral grid reaches radii far past ``plan.radial.r_max``.
    The high-pass remainder decays like a Gaussian of width ``1/FAR_WIDTH``
    away from the support of ``f`` and is dropped there.
    """

    grid: object  # RadialGrid on [r_max, radius]
    lam: np.ndarray
    lam_weights: np.ndarray
    forward: np.ndarray  # (n_lam, n_radial): samples on the plan -> transform on lam
    phi: np.ndarray  # (n_far, n_lam)
    order: float


_FAR_CACHE: dict = {}


def far_field(plan: HankelPlan, radius: float = FAR_RADIUS) -> FarField:
    """Build (or fetch) the far-field evaluator attached to ``plan``."""
    cfg = plan.config
    key = (plan.d, plan.order, cfg, radius)
    if key in _FAR_CACHE:
        return _FAR_CACHE[key]
    r_in = plan.radial.r_max
    if radius <= r_in:
        raise ValueError("far radius must exceed the plan's r_max")
    r, wr = composite_rule(GridConfig(r_in, radius, FAR_BAND, width=2.0, oversample=cfg.oversample,
                                      extra=cfg.extra - 2), plan.d)
    lam, wl = composite_rule(GridConfig(plan.spectral.lambda_min, FAR_BAND, radius,
                                        oversample=cfg.oversample, extra=cfg.extra), plan.d)
    fwd = basis(plan.order, plan.d, plan.r, lam).T * plan.radial.quad_weights[None, :]
    ff = FarField(RadialGrid(r, wr, plan.d, r_in, radius), lam, wl, fwd,
                  basis(plan.order, plan.d, r, lam), plan.order)
    if len(_FAR_CACHE) >= 16:
        _FAR_CACHE.pop(next(iter(_FAR_CACHE)))
    _FAR_CACHE[key] = ff
    return ff


def _far_basis(ff: FarField, rule: TimeRule, rank_tol: float = 1e-13) -> np.ndarray:
    if id(ff) not in rule.far_cache:
        rule.far_cache[id(ff)] = _compress(low_pass(ff.lam)[:, None] * rule.table(ff.lam), rank_tol)
    return rule.far_cache[id(ff)]


@dataclass
class SquareValues:
    """Pointwise square function on the plan's grid plus its far-field tail.

    ``l2_spectral`` is ``||S f||_2`` by Fubini and Plancherel in each time
    slice; it does not depend on the radial truncation.  ``edge_highpass``
    is the dropped high-pass part at ``r_max`` relative to the peak of ``S f``.
    """

    near: RadialFunction
    far: RadialFunction | None
    l2_spectral: float
    edge_highpass: float = 0.0

    def lp_norm(self, w: WeightSpec | None, p: float) -> float:
        """``||S f||_{L^p_w}`` from the pointwise values (near plus far)."""
        total = weighted_lp_norm(self.near, w, p) ** p
        if self.far is not None:
            total += weighted_lp_norm(self.far, w, p) ** p
        return total ** (1.0 / p)


def _square_parts(plan, coeffs, rule, ff, far_coeffs) -> SquareValues:
    """``coeffs`` are ``w_j (transform)_j`` per radial profile block on ``plan``."""
    A = plan.phi * coeffs[None, :]
    near = np.sqrt((np.abs(A @ rule.basis) ** 2).sum(axis=1))
    table = rule.table(plan.lam)
    l2 = math.sqrt(sphere_area(plan.d) * float(np.sum(
        np.abs(coeffs[:, None] * table) ** 2 / plan.spectral.quad_weights[:, None])))
    far, edge = None, 0.0
    if ff is not None:
        far_vals = np.sqrt((np.abs((ff.phi * far_coeffs[None, :]) @ _far_basis(ff, rule)) ** 2).sum(axis=1))
        far = RadialFunction(ff.grid, far_vals)
        hp = (plan.phi[-1] * coeffs * (1.0 - low_pass(plan.lam))) @ rule.basis
        peak = float(near.max())
        edge = float(np.sqrt(np.sum(np.abs(hp) ** 2)) / peak) if peak > 0 else 0.0
    return SquareValues(RadialFunction(plan.radial, near), far, l2, edge)


def square_function(params: ModelParams, alpha: float | None, f, plan: HankelPlan | None = None,
                    rule: TimeRule | None = None, s: float | None = None,
                    tail_tol: float = 1e-9, far: bool = True) -> SquareValues:
    """Pointwise ``S_alpha f`` (or the ``s`` variant when ``alpha`` is None)."""
    plan = plan or build_plan(params)
    kind, param = ("alpha", alpha) if alpha is not None else ("s", s)
    if kind == "alpha" and not 0 < alpha < 1:
        raise ValueError("need 0 < alpha < 1")
    if kind == "s" and not 0 < s < 2:
        raise ValueError("need 0 < s < 2")
    rule = rule or time_rule(plan, kind, param)
    fhat = plan.forward(f)
    wts = np.abs(fhat) ** 2 * plan.spectral.quad_weights
    frac = float(np.sum(wts * rule.tail_fraction) / np.sum(wts)) if np.sum(wts) > 0 else 0.0
    if frac > tail_tol:
        raise TailDivergenceError(f"t-quadrature tails carry {frac:.1e} of the square integral")
    ff = far_field(plan) if far else None
    far_coeffs = ff.lam_weights * (ff.forward @ plan._values(f)) if ff else None
    return _square_parts(plan, plan.spectral.quad_weights * fhat, rule, ff, far_coeffs)


def _square_ratios(plan, members, rule, p, w, alpha, s):
    """Ratios per member; for ``p = 2`` and constant ``w`` also the pointwise route."""
    up, down, norms, pointwise, edge = [], [], [], [], []
    l2 = p == 2 and (w is None or w.is_constant)
    for f in members:
        sf = square_function(plan.params, alpha, f, plan, rule, s=s)
        nf = weighted_lp_norm(f, w, p)
        ns = sf.l2_spectral if l2 else sf.lp_norm(w, p)
        if l2:
            pointwise.append(sf.lp_norm(w, p) / nf)
        edge.append(sf.edge_highpass)
        up.append(ns / nf)
        down.append(nf / ns)
        norms.append([ns, nf])
    return up, down, norms, pointwise, max(edge)


def verify_square_equiv(params: ModelParams, alpha: float, p: float, w: WeightSpec | None = None,
                        family: TestFamily | None = None, seed: int = 0, size: int = 40,
                        threshold: float = DEFAULT_THRESHOLD, refine: bool = True) -> Certificate:
    """``||S_alpha f||_{L^p_w} ~ ||f||_{L^p_w}``; both ratios over the family."""
    w = w or WeightSpec.constant()
    win = window(params, 1.0, "square")
    if not win.contains(p):
        raise WindowViolationError(f"p={p} outside ({win.p_lower:g}, {win.p_upper:g})")
    wrep = _check_weight(w, p, win, params.d)
    family = family or make_family(params, seed, size)
    plan = family.plan
    rule = time_rule(plan, "alpha", alpha)
    up, down, norms, pointwise, edge = _square_ratios(plan, family.members, rule, p, w, alpha, None)
    combined = np.maximum(up, down)
    i = int(np.argmax(combined))
    scalar = math.sqrt(square_scalar("alpha", alpha))
    extra = {"up_max": float(max(up)), "down_max": float(max(down)), "up_min": float(min(up)),
             "t_nodes": len(rule.log_t), "svd_rank": rule.rank, "weight_check": wrep.method,
             "far_radius": FAR_RADIUS, "edge_highpass": edge}
    if p == 2 and w.is_constant:
        extra["plancherel_scalar"] = scalar
        extra["max_scalar_deviation"] = float(np.max(np.abs(np.array(up) - scalar)) / scalar)
        extra["pointwise_max_deviation"] = float(np.max(np.abs(np.array(pointwise) - scalar)) / scalar)
    drift = 0.0
    if refine:
        (rp,) = _refined(params, [params.nu0])
        u2, d2, *_ = _square_ratios(rp, family.on_plan(rp), time_rule(rp, "alpha", alpha), p, w, alpha, None)
        drift = _drift(float(combined.max()), float(np.maximum(u2, d2).max()))
    return Certificate(
        "square", _param_block(params, alpha=alpha, p=p, weight=_weight_block(w)), win.as_dict(),
        {"seed": family.seed, "size": family.size, "rejected": family.rejected},
        float(combined[i]), i, norms, _grid_block(plan), drift, float(threshold),
        _trajectory(combined), extra=extra)


# ---------------------------------------------------------------------------
# difference square function


def difference_square_function(params: ModelParams, s: float, f, plan_a: HankelPlan,
                               plan_0: HankelPlan, rule: TimeRule | None = None,
                               far: bool = True) -> SquareValues:
    """``(int t^{-s} |(t L e^{-tL} + t Delta e^{t Delta}) f|^2 dt/t)^{1/2}`` pointwise.

    The two transforms live in different eigenbases, so the difference is
    formed in physical space; ``l2_spectral`` is not available and is NaN.
    """
    rule = rule or time_rule(plan_a, "s", s)
    ff = far_field(plan_a) if far else None
    if plan_a is plan_0:
        zero_far = RadialFunction(ff.grid, np.zeros(ff.grid.size)) if ff else None
        return SquareValues(RadialFunction(plan_a.radial, np.zeros(plan_a.radial.size)), zero_far, 0.0)
    wl = plan_a.spectral.quad_weights
    A = plan_a.phi * (wl * plan_a.forward(f))[None, :] - plan_0.phi * (wl * plan_0.forward(f))[None, :]
    near = np.sqrt((np.abs(A @ rule.basis) ** 2).sum(axis=1))
    far_fn = None
    if ff is not None:
        f0 = far_field(plan_0)
        v = plan_a._values(f)
        B = (ff.phi * (ff.lam_weights * (ff.forward @ v))[None, :]
             - f0.phi * (f0.lam_weights * (f0.forward @ v))[None, :])
        far_fn = RadialFunction(ff.grid, np.sqrt((np.abs(B @ _far_basis(ff, rule)) ** 2).sum(axis=1)))
    return SquareValues(RadialFunction(plan_a.radial, near), far_fn, math.nan)


def _difference_ratios(plan_a, plan_0, members, specs, rule, s, p, w, d):
    ratios, norms, excluded = [], [], []
    for i, (f, spec) in enumerate(zip(members, specs)):
        if not _integrable_at_origin(spec, s, p, w, d):
            excluded.append(i)
            ratios.append(0.0)
            norms.append([math.nan, math.nan])
            continue
        g = difference_square_function(plan_a.params, s, f, plan_a, plan_0, rule)
        lhs = g.lp_norm(w, p)
        rhs = weighted_lp_norm(RadialFunction(f.grid, f.values * f.r ** (-s)), w, p)
        ratios.append(lhs / rhs)
        norms.append([lhs, rhs])
    return ratios, norms, excluded


def verify_difference_square(params: ModelParams, s: float, p: float, w: WeightSpec | None = None,
                             family: TestFamily | None = None, seed: int = 0, size: int = 40,
                             threshold: float = DEFAULT_THRESHOLD, refine: bool = True) -> Certificate:
    """The difference square function against ``|| f / |x|^s ||_{L^p_w}``.

    The case (``a >= 0`` with ``w in A_p``, or the restricted window when
    ``a < 0``) is selected from ``params``.
    """
    w = w or WeightSpec.constant()
    d = params.d
    win = window(params, s, "difference")
    if not win.valid:
        raise WindowViolationError(win.reason)
    if not win.contains(p):
        raise WindowViolationError(f"p={p} outside ({win.p_lower:g}, {win.p_upper:g})")
    wrep = _check_weight(w, p, win, d)
    plan_a = build_plan(params)
    plan_0 = build_plan(params, params.kappa)
    family = family or make_family(params, seed, size, [plan_a, plan_0])
    rule = time_rule(plan_a, "s", s)
    ratios, norms, excluded = _difference_ratios(plan_a, plan_0, family.members, family.specs,
                                                 rule, s, p, w, d)
    i = int(np.argmax(ratios))
    drift = 0.0
    if refine and params.a != 0:
        ra, r0 = _refined(params, [params.nu0, params.kappa])
        r2, _, _ = _difference_ratios(ra, r0, family.on_plan(ra), family.specs,
                                      time_rule(ra, "s", s), s, p, w, d)
        drift = _drift(max(ratios), max(r2))
    notes = [f"case {'a >= 0' if params.a >= 0 else 'a < 0'}"]
    if excluded:
        notes.append(f"members {excluded} excluded: |x|^(-sp) w |f|^p not integrable at 0")
    return Certificate(
        "difference_square", _param_block(params, s=s, p=p, weight=_weight_block(w)), win.as_dict(),
        {"seed": family.seed, "size": family.size, "rejected": family.rejected},
        float(ratios[i]), i, norms, _grid_block(plan_a), drift, float(threshold),
        _trajectory(ratios), extra={"weight_check": wrep.method, "svd_rank": rule.rank},
        notes=notes)
