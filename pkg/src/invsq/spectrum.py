"""Exponent and weight algebra.

Covers the model parameters of ``L_a = -Delta + a/|x|^2``, the ``d_alpha``
notation, conjugate exponents with ``inf``, the exponent windows of the
weighted estimates, and Muckenhoupt / reverse Hoelder classification of the
radial weights used in the package.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special as _sp

INF = math.inf

THEOREMS = ("equiv_forward", "equiv_reverse", "hardy", "square", "difference")


class ParameterError(ValueError):
    """Invalid model parameters."""


class DimensionError(ParameterError):
    pass


class SubcriticalCouplingError(ParameterError):
    pass


class QuadratureError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# model parameters


@dataclass(frozen=True)
class ModelParams:
    d: int
    a: float
    sigma: float
    nu0: float
    delta: float
    eps_star: float | None

    @property
    def kappa(self) -> float:
        """``(d-2)/2``, the Bessel order of the free Laplacian."""
        return (self.d - 2) / 2.0

    @property
    def critical(self) -> bool:
        return self.nu0 == 0.0

    def nu_ell(self, ell):
        """Bessel order of the degree-``ell`` spherical-harmonic sector."""
        ell = np.asarray(ell, dtype=float)
        out = np.sqrt((ell + self.kappa) ** 2 + self.a)
        return float(out) if out.ndim == 0 else out

    def as_dict(self) -> dict:
        return {"d": self.d, "a": self.a, "sigma": self.sigma, "nu0": self.nu0,
                "delta": self.delta, "eps_star": self.eps_star}


def critical_coupling(d: int) -> float:
    return -(((d - 2) / 2.0) ** 2)


def make_params(d: int, a: float) -> ModelParams:
    """Build :class:`ModelParams` for dimension ``d`` and coupling ``a``."""
    if int(d) != d or d < 3:
        raise DimensionError("dimension must be >= 3")
    d = int(d)
    a = float(a)
    if not math.isfinite(a):
        raise ParameterError("coupling must be finite")
    if a < critical_coupling(d):
        raise SubcriticalCouplingError(
            f"a={a} is below the Hardy threshold {critical_coupling(d)} for d={d}")
    root = math.sqrt(max((d - 2) ** 2 + 4.0 * a, 0.0))
    sigma = (d - 2) / 2.0 - 0.5 * root
    nu0 = 0.5 * root
    delta = a + ((d - 2) / 2.0) ** 2 - 0.25
    eps_star = min(1.0, delta / (3.0 * d * d)) if delta > 0 else None
    return ModelParams(d=d, a=a, sigma=sigma, nu0=nu0, delta=delta, eps_star=eps_star)


# ---------------------------------------------------------------------------
# exponents


def conjugate(p: float) -> float:
    """Hoelder conjugate with ``conjugate(1) = inf`` and ``conjugate(inf) = 1``."""
    p = float(p)
    if p == INF:
        return 1.0
    if p == 1.0:
        return INF
    if p < 1.0:
        raise ValueError(f"conjugate exponent undefined for p={p} < 1")
    return p / (p - 1.0)


def d_alpha(alpha: float, d: int) -> float:
    """``d/alpha`` for ``alpha > 0``, ``inf`` otherwise."""
    return d / alpha if alpha > 0 else INF


def _ratio(p: float, q: float) -> float:
    if p == INF:
        return INF
    return p / q


@dataclass(frozen=True)
class WindowSpec:
    theorem_id: str
    p_lower: float
    p_upper: float
    ap_index: float
    rh_index: float
    valid: bool
    reason: str = ""

    def contains(self, p: float) -> bool:
        """Strict membership; endpoints are never admissible."""
        return self.valid and self.p_lower < p < self.p_upper

    def weight_indices(self, p: float) -> tuple[float, float]:
        """``(A index, RH index)`` for exponent ``p``: ``A_{p/r} cap RH_{(q/p)'}``."""
        return _ratio(p, self.ap_index), conjugate(_ratio(self.rh_index, p))

    def as_dict(self) -> dict:
        return {"theorem_id": self.theorem_id, "p_lower": self.p_lower,
                "p_upper": self.p_upper, "ap_index": self.ap_index,
                "rh_index": self.rh_index, "valid": self.valid, "reason": self.reason}


def window(params: ModelParams, s: float, theorem_id: str) -> WindowSpec:
    """Open exponent interval and weight-class indices for one estimate."""
    if theorem_id not in THEOREMS:
        raise ValueError(f"unknown theorem id {theorem_id!r}")
    d, sig = params.d, params.sigma
    reasons = []
    if theorem_id == "hardy":
        if not 0 < s < d:
            reasons.append(f"need 0 < s < d, got s={s}")
        if not d - s - 2 * sig > 0:
            reasons.append(f"need d - s - 2 sigma > 0, got {d - s - 2 * sig:g}")
        lo = conjugate(d_alpha(sig, d))
        hi = d_alpha(s + sig, d)
        ap, rh = lo, hi
    else:
        if not 0 < s < 2 and theorem_id != "square":
            reasons.append(f"need 0 < s < 2, got s={s}")
        if theorem_id == "equiv_forward":
            lo = max(1.0, d / (d - sig))
            hi = d_alpha(s + sig, d)
            ap, rh = lo, hi
        elif theorem_id == "equiv_reverse":
            lo = max(1.0, d / (d - sig))
            hi = d / max(s, sig)
            ap, rh = lo, hi
        elif theorem_id == "square":
            lo = conjugate(d_alpha(sig, d))
            hi = d_alpha(sig, d)
            ap, rh = lo, hi
        else:  # difference
            if params.a >= 0:
                lo, hi, ap, rh = 1.0, INF, 1.0, INF
            else:
                lo = max(1.0, d / (d + s - sig))
                hi = d_alpha(sig, d)
                ap, rh = lo, hi
    if not lo < hi:
        reasons.append(f"empty window ({lo:g}, {hi:g})")
    return WindowSpec(theorem_id, lo, hi, ap, rh, valid=not reasons, reason="; ".join(reasons))


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class WeightSpec:
    """A radial weight: ``|x|^alpha``, the composite ``w_eps``, or a table."""

    kind: str
    alpha: float = 0.0
    eps: float = 0.0
    table_r: tuple = field(default=(), repr=False)
    table_w: tuple = field(default=(), repr=False)
    description: str = ""

    @classmethod
    def power(cls, alpha: float) -> "WeightSpec":
        return cls("power", alpha=float(alpha), description=f"|x|^{alpha:g}")

    @classmethod
    def constant(cls) -> "WeightSpec":
        return cls("power", alpha=0.0, description="1")

    @classmethod
    def composite(cls, eps: float) -> "WeightSpec":
        if not 0 < eps < 1:
            raise ValueError("composite weight needs 0 < eps < 1")
        return cls("composite", eps=float(eps),
                   description=f"|x|^({eps:g}-1)/(1+|x|^{eps:g})^2")

    @classmethod
    def table(cls, r: Sequence[float], w: Sequence[float]) -> "WeightSpec":
        r = tuple(float(v) for v in r)
        w = tuple(float(v) for v in w)
        if len(r) != len(w) or len(r) < 4:
            raise ValueError("table weight needs >= 4 matching samples")
        if any(b <= a for a, b in zip(r, r[1:])) or r[0] <= 0 or min(w) <= 0:
            raise ValueError("table weight needs increasing positive radii and positive values")
        return cls("table", table_r=r, table_w=w, description=f"table[{len(r)}]")

    @classmethod
    def parse(cls, text: str) -> "WeightSpec":
        """Parse ``"1"``, ``"power:-1"`` or ``"composite:0.5"``."""
        text = text.strip()
        if text in ("1", "const", "constant"):
            return cls.constant()
        kind, _, val = text.partition(":")
        if kind == "power":
            return cls.power(float(val))
        if kind == "composite":
            return cls.composite(float(val))
        raise ValueError(f"cannot parse weight {text!r}")

    @property
    def is_constant(self) -> bool:
        return self.kind == "power" and self.alpha == 0.0

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "power":
            return np.ones_like(r) if self.alpha == 0 else r ** self.alpha
        if self.kind == "composite":
            re = r ** self.eps
            return r ** (self.eps - 1.0) / (1.0 + re) ** 2
        lr = np.log(np.asarray(self.table_r))
        lw = np.log(np.asarray(self.table_w))
        return np.exp(np.interp(np.log(r), lr, lw, left=np.nan, right=np.nan))

    def envelope(self) -> tuple[float, float]:
        """Power exponents of the weight near 0 and near infinity."""
        if self.kind == "power":
            return self.alpha, self.alpha
        if self.kind == "composite":
            return self.eps - 1.0, -1.0 - self.eps
        lr = np.log(np.asarray(self.table_r))
        lw = np.log(np.asarray(self.table_w))
        k = min(4, len(lr) - 1)
        lo = np.polyfit(lr[:k + 1], lw[:k + 1], 1)[0]
        hi = np.polyfit(lr[-k - 1:], lw[-k - 1:], 1)[0]
        return float(lo), float(hi)

    def label(self) -> str:
        return self.description or self.kind


def power_weight_class(alpha: float, p: float, q: float, d: int) -> tuple[bool, bool]:
    """Exact ``(|x|^alpha in A_p, |x|^alpha in RH_q)``.

    ``A_p``: ``-d < alpha < d(p-1)``; ``A_1``: ``-d < alpha <= 0``;
    ``A_inf``: ``alpha > -d``.  ``RH_q``: ``alpha q > -d``; ``RH_inf``:
    ``alpha >= 0``; ``RH_1`` is read as no constraint beyond ``A_inf``.
    """
    if p == INF:
        in_ap = alpha > -d
    elif p == 1.0:
        in_ap = -d < alpha <= 0
    elif p > 1.0:
        in_ap = -d < alpha < d * (p - 1.0)
    else:
        raise ValueError(f"A_p needs p >= 1, got {p}")
    if q == INF:
        in_rh = alpha >= 0
    elif q == 1.0:
        in_rh = alpha > -d
    elif q > 1.0:
        in_rh = alpha * q > -d
    else:
        raise ValueError(f"RH_q needs q >= 1, got {q}")
    return in_ap, in_rh


@dataclass
class AdmissibilityReport:
    admissible: bool
    method: str
    ap_index: float
    rh_index: float
    details: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.admissible


def weight_admissible(w: WeightSpec, p: float, p0: float, q0: float, d: int,
                      numeric: bool = True) -> AdmissibilityReport:
    """Decide ``w in A_{p/p0} cap RH_{(q0/p)'}``.

    Power weights are classified exactly.  Composite and tabulated weights use
    the two-sided power envelope (both end exponents must pass), corroborated
    by :func:`ap_characteristic_estimate`; the report is then labelled
    ``"envelope+numeric"``.
    """
    if not p0 < p < q0:
        return AdmissibilityReport(False, "exact", math.nan, math.nan,
                                   {"reason": f"need p0 < p < q0, got {p0:g}, {p:g}, {q0:g}"})
    ap = _ratio(p, p0)
    rh = conjugate(_ratio(q0, p))
    if w.kind == "power":
        in_ap, in_rh = power_weight_class(w.alpha, ap, rh, d)
        return AdmissibilityReport(in_ap and in_rh, "exact", ap, rh,
                                   {"in_Ap": in_ap, "in_RH": in_rh})
    lo, hi = w.envelope()
    c_lo = power_weight_class(lo, ap, rh, d)
    c_hi = power_weight_class(hi, ap, rh, d)
    ok = all(c_lo) and all(c_hi)
    details = {"envelope": [lo, hi], "near_zero": list(c_lo), "near_infinity": list(c_hi)}
    if numeric and ok and 1.0 < ap < INF:
        est = ap_characteristic_estimate(w, ap, d)
        details["ap_characteristic"] = est
        ok = ok and math.isfinite(est)
    return AdmissibilityReport(ok, "envelope+numeric", ap, rh, details)


def dual_weight_check(alpha: float, p: float, p0: float, q0: float, d: int) -> bool:
    """Check the power-weight duality between ``w`` and ``w^{1-p'}``.

    ``|x|^alpha in A_{p/p0} cap RH_{(q0/p)'}`` iff
    ``|x|^{alpha(1-p')} in A_{p'/q0'} cap RH_{(p0'/p')'}``,
    both sides evaluated exactly; returns whether they agree.
    """
    if not 1 < p0 < p < q0 < INF:
        raise ValueError("need 1 < p0 < p < q0 < inf")
    lhs = all(power_weight_class(alpha, p / p0, conjugate(q0 / p), d))
    pp = conjugate(p)
    beta = alpha * (1.0 - pp)
    rhs = all(power_weight_class(beta, pp / conjugate(q0), conjugate(conjugate(p0) / pp), d))
    return lhs == rhs


def smoothing_admissible(params: ModelParams, eps: float) -> AdmissibilityReport:
    """Whether the smoothing estimates apply at ``(params, eps)``.

    Needs ``delta > 0`` and ``w_eps`` admissible at ``p = 2`` for the forward
    equivalence window with ``s = 1/2``.
    """
    if not 0 < eps < 1:
        raise ValueError("need 0 < eps < 1")
    win = window(params, 0.5, "equiv_forward")
    delta_ok = params.delta > 0
    wrep = weight_admissible(WeightSpec.composite(eps), 2.0, win.p_lower, win.p_upper, params.d)
    return AdmissibilityReport(delta_ok and bool(wrep), wrep.method, wrep.ap_index, wrep.rh_index,
                               {"delta": params.delta, "delta_positive": delta_ok,
                                "weight": wrep.details, "weight_admissible": bool(wrep),
                                "window": win.as_dict()})


# ---------------------------------------------------------------------------
# numeric A_p characteristic

_GL_X, _GL_W = leggauss(24)


def _log_panels(lo: float, hi: float, per_decade: float = 2.0):
    n = max(1, int(math.ceil(per_decade * math.log10(hi / lo))))
    return np.geomspace(lo, hi, n + 1)


def _panel_integral(g: Callable, edges: np.ndarray) -> float:
    a, b = edges[:-1, None], edges[1:, None]
    x = 0.5 * (b - a) * _GL_X[None, :] + 0.5 * (b + a)
    wts = 0.5 * (b - a) * _GL_W[None, :]
    return float(np.sum(wts * g(x)))


def _sphere_fraction(rho, x0: float, r: float, d: int):
    """Fraction of the sphere ``|y| = rho`` lying in the ball ``B(x0 e, r)``."""
    c = (rho ** 2 + x0 ** 2 - r ** 2) / (2.0 * rho * x0)
    c = np.clip(c, -1.0, 1.0)
    cap = 0.5 * _sp.betainc((d - 1) / 2.0, 0.5, 1.0 - c ** 2)
    return np.where(c >= 0, cap, 1.0 - cap)


def _ball_integral(g: Callable, x0: float, r: float, d: int, inner: float) -> float:
    omega = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)
    if x0 == 0.0 or r >= x0:
        # the ball contains the origin; split the radial range where the sphere
        # stops being fully inside
        full = r - x0
        lo = inner * r
        edges = _log_panels(lo, full) if full > lo else np.array([lo])
        total = 0.0
        if len(edges) > 1:
            total += _panel_integral(lambda s: g(s) * s ** (d - 1), edges)
        if x0 > 0:
            e2 = np.linspace(max(full, lo), r + x0, 9)
            total += _panel_integral(
                lambda s: g(s) * s ** (d - 1) * _sphere_fraction(s, x0, r, d), e2)
        return omega * total
    # ball away from the origin; the radial range is [x0 - r, x0 + r]
    e = np.concatenate([_log_panels(x0 - r, x0, 4.0), np.linspace(x0, x0 + r, 9)[1:]])
    return omega * _panel_integral(lambda s: g(s) * s ** (d - 1) * _sphere_fraction(s, x0, r, d), e)


def _origin_limit(g: Callable, x0: float, r: float, d: int) -> float:
    """Ball integral with the origin excised at shrinking radii, extrapolated.

    Successive increments from cutoffs ``1e-7, 10^-10.5, 1e-14`` shrink
    geometrically for an integrable singularity; otherwise the integral is
    declared divergent and ``inf`` is returned.
    """
    i1, i2, i3 = (_ball_integral(g, x0, r, d, c) for c in (1e-7, 10 ** -10.5, 1e-14))
    d1, d2 = i2 - i1, i3 - i2
    if not all(map(math.isfinite, (i1, i2, i3))):
        return INF
    if d2 <= 1e-13 * abs(i3):
        return i3
    q = d2 / d1 if d1 > 0 else 1.0
    if q >= 0.5:
        return INF
    return i3 + d2 * q / (1.0 - q)


def default_ball_family(levels: int = 20, off_levels: int = 10):
    """Centered dyadic balls plus off-center balls at three relative radii."""
    balls = [(0.0, 2.0 ** k) for k in range(-levels, levels + 1)]
    for k in range(-off_levels, off_levels + 1):
        x0 = 2.0 ** k
        balls += [(x0, x0 / 4.0), (x0, x0), (x0, 4.0 * x0)]
    return balls


def ap_characteristic_estimate(w: WeightSpec, p: float, d: int,
                               ball_family: Iterable[tuple[float, float]] | None = None) -> float:
    """Lower estimate of ``[w]_{A_p}`` over a finite family of balls.

    Each ball is ``(|x0|, r)``.  Radial symmetry reduces every ball average to
    a 1-D integral using the exact spherical-cap fraction.  Returns ``inf``
    when an average fails to converge at the origin (non-integrable weight).
    """
    if not 1 < p < INF:
        raise ValueError("need 1 < p < inf")
    balls = list(default_ball_family() if ball_family is None else ball_family)
    pp = conjugate(p)
    dual = lambda s: w(s) ** (1.0 - pp)
    vol_unit = math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)
    best = 0.0
    for x0, r in balls:
        vol = vol_unit * r ** d
        avgs = []
        for g in (w, dual):
            if x0 < r:
                val = _origin_limit(g, x0, r, d)
                if not math.isfinite(val):
                    return INF
            else:
                val = _ball_integral(g, x0, r, d, 0.0)
            if not math.isfinite(val) or val <= 0:
                raise QuadratureError(f"ball average failed for ball {(x0, r)}")
            avgs.append(val / vol)
        best = max(best, avgs[0] * avgs[1] ** (p - 1.0))
    return best
