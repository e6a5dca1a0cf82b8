"""Radial discretization and the order-nu Hankel transform.

On radial functions ``L_a`` is diagonalized by

    f^(lam) = int_0^inf f(r) phi_lam(r) r^(d-1) dr,
    f(r)    = int_0^inf f^(lam) phi_lam(r) lam^(d-1) dlam,

with ``phi_lam(r) = (lam r)^(-(d-2)/2) J_nu(lam r)`` and ``L_a phi_lam =
lam^2 phi_lam``.  With these measures the pair is unitary and needs no extra
constant.  Both integrals are discretized by composite Gauss-Legendre rules,
so a plan is two dense matrices built from the basis samples.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Sequence, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special as _sp

from .specfun import check_order, gamma
from .spectrum import ModelParams, WeightSpec

Multiplier = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


class RoundTripError(RuntimeError):
    """The plan failed its construction-time round-trip self-test."""


class GridMismatchError(ValueError):
    pass


class DivergentSubordinationError(RuntimeError):
    pass


def sphere_area(d: int) -> float:
    """Surface measure ``omega_{d-1} = 2 pi^(d/2) / Gamma(d/2)`` of the unit sphere."""
    return 2.0 * math.pi ** (d / 2.0) / gamma(d / 2.0)


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class GridConfig:
    """Composite Gauss-Legendre layout for one half-line.

    Panels grow geometrically by ``ratio`` from ``lo`` until they reach
    ``width``, then continue with constant width to ``hi``.  A panel of
    length ``h`` gets ``ceil(oversample * bandwidth * h / 2) + extra`` nodes,
    ``bandwidth`` being the largest oscillation frequency to resolve.
    """

    lo: float
    hi: float
    bandwidth: float
    width: float = 1.0
    ratio: float = 3.0
    oversample: float = 0.7
    extra: int = 12
    min_nodes: int = 8


def _panel_edges(cfg: GridConfig) -> np.ndarray:
    edges = [cfg.lo]
    x = cfg.lo
    while x < cfg.hi:
        step = min((cfg.ratio - 1.0) * x, cfg.width)
        x = min(x + step, cfg.hi)
        if cfg.hi - x < 0.25 * step:
            x = cfg.hi
        edges.append(x)
    return np.array(edges)


def composite_rule(cfg: GridConfig, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for ``int_lo^hi g(x) x^(d-1) dx``."""
    if not 0 < cfg.lo < cfg.hi:
        raise ValueError("grid range must satisfy 0 < lo < hi")
    edges = _panel_edges(cfg)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        n = max(cfg.min_nodes, int(math.ceil(cfg.oversample * cfg.bandwidth * (b - a) / 2.0)) + cfg.extra)
        x, w = _gauss(n)
        nodes.append(0.5 * (b - a) * x + 0.5 * (b + a))
        weights.append(0.5 * (b - a) * w)
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights) * nodes ** (d - 1)
    return nodes, weights


@lru_cache(maxsize=256)
def _gauss(n: int):
    return leggauss(n)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    nodes: np.ndarray
    quad_weights: np.ndarray
    d: int
    r_min: float
    r_max: float

    @property
    def size(self) -> int:
        return len(self.nodes)

    def integrate(self, values) -> complex:
        """``int_0^inf g(r) r^(d-1) dr`` for samples ``g`` on the nodes."""
        return np.dot(self.quad_weights, values)


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    lambdas: np.ndarray
    quad_weights: np.ndarray
    d: int
    lambda_min: float
    lambda_max: float

    @property
    def size(self) -> int:
        return len(self.lambdas)

    def integrate(self, values) -> complex:
        return np.dot(self.quad_weights, values)


def radial_grid(d: int, r_min: float = 1e-6, r_max: float = 40.0, bandwidth: float = 40.0,
                **kw) -> RadialGrid:
    n, w = composite_rule(GridConfig(r_min, r_max, bandwidth, **kw), d)
    return RadialGrid(n, w, d, r_min, r_max)


def spectral_grid(d: int, lam_min: float = 1e-6, lam_max: float = 40.0, bandwidth: float = 40.0,
                  **kw) -> SpectralGrid:
    n, w = composite_rule(GridConfig(lam_min, lam_max, bandwidth, **kw), d)
    return SpectralGrid(n, w, d, lam_min, lam_max)


# ---------------------------------------------------------------------------
# radial functions


@dataclass(eq=False)
class RadialFunction:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.nodes.shape:
            raise GridMismatchError("values do not match the grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("radial function has non-finite values")

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def __add__(self, other: "RadialFunction") -> "RadialFunction":
        _same_grid(self.grid, other.grid)
        return RadialFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "RadialFunction") -> "RadialFunction":
        _same_grid(self.grid, other.grid)
        return RadialFunction(self.grid, self.values - other.values)

    def __mul__(self, c: complex) -> "RadialFunction":
        return RadialFunction(self.grid, c * self.values)

    __rmul__ = __mul__

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["r", "re", "im"])
            for r, v in zip(self.grid.nodes, self.values):
                wr.writerow([repr(float(r)), repr(float(v.real)), repr(float(v.imag))])

    @classmethod
    def from_csv(cls, grid: RadialGrid, path) -> "RadialFunction":
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        r = np.array([float(x["r"]) for x in rows])
        if r.shape != grid.nodes.shape or not np.allclose(r, grid.nodes, rtol=1e-15, atol=0):
            raise GridMismatchError("CSV nodes do not match the grid")
        return cls(grid, np.array([float(x["re"]) + 1j * float(x["im"]) for x in rows]))


def _same_grid(g1, g2) -> None:
    if g1 is not g2 and (g1.nodes.shape != g2.nodes.shape or getattr(g1, "d", None) != getattr(g2, "d", None)
                         or not np.array_equal(g1.nodes, g2.nodes)):
        raise GridMismatchError("functions live on different grids")


# ---------------------------------------------------------------------------
# plans


@dataclass(frozen=True)
class PlanConfig:
    """Sizes and ranges for :func:`build_plan` (JSON-serializable)."""

    r_min: float = 1e-6
    r_max: float = 40.0
    lam_min: float = 1e-6
    lam_max: float = 40.0
    radial_bandwidth: float | None = None
    spectral_bandwidth: float | None = None
    width: float = 1.0
    oversample: float = 0.7
    extra: int = 12
    min_nodes: int = 8
    roundtrip_tol: float = 1e-8

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PlanConfig":
        return cls(**json.loads(text))

    def scaled(self, factor: float) -> "PlanConfig":
        """Same ranges with node density multiplied by ``factor``."""
        kw = asdict(self)
        kw["oversample"] *= factor
        kw["extra"] = int(round(self.extra * factor))
        kw["min_nodes"] = int(round(self.min_nodes * factor))
        return PlanConfig(**kw)


def basis(order: float, d: int, r, lam) -> np.ndarray:
    """``phi_lam(r) = (lam r)^(-(d-2)/2) J_nu(lam r)`` on the outer grid ``r x lam``."""
    kappa = (d - 2) / 2.0
    z = np.multiply.outer(np.asarray(r, float), np.asarray(lam, float))
    return z ** (-kappa) * _sp.jv(order, z)


def basis_dr(order: float, d: int, r, lam) -> np.ndarray:
    """``d/dr phi_lam(r)`` on the outer grid ``r x lam``."""
    kappa = (d - 2) / 2.0
    lam = np.asarray(lam, float)
    z = np.multiply.outer(np.asarray(r, float), lam)
    jprime = order / z * _sp.jv(order, z) - _sp.jv(order + 1.0, z)
    return lam * z ** (-kappa) * (jprime - kappa / z * _sp.jv(order, z))


class HankelPlan:
    """Dense discretization of the order-``nu`` transform on fixed grids."""

    def __init__(self, order: float, d: int, radial: RadialGrid, spectral: SpectralGrid,
                 config: PlanConfig, params: ModelParams | None = None):
        self.order = check_order(order)
        self.d = d
        self.radial = radial
        self.spectral = spectral
        self.config = config
        self.params = params
        self.critical_order = self.order == 0.0
        self.phi = basis(self.order, d, radial.nodes, spectral.lambdas)
        self.phi.setflags(write=False)
        self.roundtrip_error: float | None = None

    @property
    def r(self) -> np.ndarray:
        return self.radial.nodes

    @property
    def lam(self) -> np.ndarray:
        return self.spectral.lambdas

    @cached_property
    def dphi(self) -> np.ndarray:
        m = basis_dr(self.order, self.d, self.radial.nodes, self.spectral.lambdas)
        m.setflags(write=False)
        return m

    def _values(self, f) -> np.ndarray:
        if isinstance(f, RadialFunction):
            _same_grid(f.grid, self.radial)
            return f.values
        f = np.asarray(f)
        if f.shape[0] != self.radial.size:
            raise GridMismatchError("values do not match the plan's radial grid")
        return f

    def function(self, values) -> RadialFunction:
        return RadialFunction(self.radial, values)

    def sample(self, g: Callable[[np.ndarray], np.ndarray]) -> RadialFunction:
        return RadialFunction(self.radial, g(self.radial.nodes))

    def forward(self, f) -> np.ndarray:
        """Spectral coefficients ``f^(lam_j)``."""
        v = self._values(f)
        wr = self.radial.quad_weights
        return self.phi.T @ (wr[:, None] * v if v.ndim == 2 else wr * v)

    def inverse_values(self, fhat) -> np.ndarray:
        fhat = np.asarray(fhat)
        wl = self.spectral.quad_weights
        return self.phi @ (wl[:, None] * fhat if fhat.ndim == 2 else wl * fhat)

    def inverse(self, fhat) -> RadialFunction:
        return RadialFunction(self.radial, self.inverse_values(fhat))

    def evaluate(self, fhat, r) -> np.ndarray:
        """Inverse transform evaluated at arbitrary radii ``r``."""
        return basis(self.order, self.d, r, self.lam) @ (self.spectral.quad_weights * np.asarray(fhat))

    def evaluate_dr(self, fhat, r) -> np.ndarray:
        return basis_dr(self.order, self.d, r, self.lam) @ (self.spectral.quad_weights * np.asarray(fhat))

    def roundtrip(self, f) -> np.ndarray:
        return self.inverse_values(self.forward(f))

    def radial_l2(self, f) -> float:
        v = self._values(f)
        return math.sqrt(sphere_area(self.d) * float(np.dot(self.radial.quad_weights, np.abs(v) ** 2)))

    def spectral_l2(self, fhat) -> float:
        return math.sqrt(sphere_area(self.d) * float(np.dot(self.spectral.quad_weights, np.abs(fhat) ** 2)))

    def multiplier_values(self, m: Multiplier) -> np.ndarray:
        if callable(m):
            vals = np.asarray(m(self.lam))
        else:
            vals = np.asarray(m)
        if vals.shape != self.lam.shape:
            vals = np.broadcast_to(vals, self.lam.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("multiplier is not finite on the spectral grid")
        return vals

    def __repr__(self) -> str:
        return (f"HankelPlan(order={self.order:g}, d={self.d}, Nr={self.radial.size}, "
                f"Nlam={self.spectral.size})")


def selftest_profiles(plan: HankelPlan) -> np.ndarray:
    """Band-limited bumps used by the construction-time round-trip check."""
    r = plan.r
    lm = plan.spectral.lambda_max
    rm = plan.radial.r_max
    gam = (0.8 * lm) ** 2 / (4.0 * 30.0)
    out = []
    for centre in (0.25 * rm, 0.4 * rm):
        g = max(gam, 30.0 / (0.2 * rm) ** 2)
        out.append(np.exp(-g * (r - centre) ** 2))
    return np.array(out)


def _relative_roundtrip(plan: HankelPlan, f: np.ndarray) -> float:
    back = plan.roundtrip(f)
    return float(plan.radial_l2(back - f) / plan.radial_l2(f))


_PLAN_CACHE: dict = {}
_PLAN_CACHE_MAX = 24


def build_plan(params: ModelParams, order: float | None = None,
               config: PlanConfig | None = None, self_test: bool = True) -> HankelPlan:
    """Build (or fetch from cache) a plan; ``order`` defaults to ``nu0``.

    Raises :class:`RoundTripError` when the grids cannot reproduce the
    self-test profiles to ``config.roundtrip_tol``.
    """
    config = config or PlanConfig()
    order = params.nu0 if order is None else float(order)
    key = (params.d, params.a, order, config, self_test)
    if key in _PLAN_CACHE:
        return _PLAN_CACHE[key]
    d = params.d
    rb = config.radial_bandwidth or config.lam_max
    sb = config.spectral_bandwidth or config.r_max
    common = dict(width=config.width, oversample=config.oversample, extra=config.extra,
                  min_nodes=config.min_nodes)
    rg = radial_grid(d, config.r_min, config.r_max, rb, **common)
    sg = spectral_grid(d, config.lam_min, config.lam_max, sb, **common)
    if rg.size < 16 or sg.size < 16:
        if self_test:
            raise RoundTripError(f"grid too coarse ({rg.size} x {sg.size} nodes)")
    plan = HankelPlan(order, d, rg, sg, config, params)
    if self_test:
        errs = [_relative_roundtrip(plan, f) for f in selftest_profiles(plan)]
        plan.roundtrip_error = max(errs)
        if not plan.roundtrip_error <= config.roundtrip_tol:
            raise RoundTripError(
                f"round-trip error {plan.roundtrip_error:.2e} exceeds {config.roundtrip_tol:.0e}")
    if len(_PLAN_CACHE) >= _PLAN_CACHE_MAX:
        _PLAN_CACHE.pop(next(iter(_PLAN_CACHE)))
    _PLAN_CACHE[key] = plan
    return plan


def clear_plan_cache() -> None:
    _PLAN_CACHE.clear()


# ---------------------------------------------------------------------------
# functional calculus


def apply_multiplier(plan: HankelPlan, f, m: Multiplier) -> RadialFunction:
    """Inverse transform of ``m(lam) f^(lam)``."""
    return plan.inverse(plan.multiplier_values(m) * plan.forward(f))


def heat(t: float) -> Callable:
    return lambda lam: np.exp(-t * lam ** 2)


def schrodinger(t: float) -> Callable:
    """Phase ``exp(i t lam^2)`` realizing ``e^{itL}``."""
    return lambda lam: np.exp(1j * t * lam ** 2)


def wave(t: float) -> Callable:
    return lambda lam: np.exp(1j * t * lam)


def power(s: float) -> Callable:
    """``lam^s``, i.e. ``L^{s/2}``."""
    return lambda lam: lam ** s


def radial_derivative(plan: HankelPlan, f) -> RadialFunction:
    """Spectral derivative ``d/dr f`` (differentiates the basis analytically)."""
    fhat = plan.forward(f)
    return RadialFunction(plan.radial, plan.dphi @ (plan.spectral.quad_weights * fhat))


def weighted_lp_norm(f: RadialFunction, w: WeightSpec | None, p: float) -> float:
    """``(int |f|^p w dx)^(1/p)`` over ``R^d`` for a radial ``f``."""
    if not 0 < p < math.inf:
        raise ValueError("need 0 < p < inf")
    g = f.grid
    wv = 1.0 if w is None or w.is_constant else w(g.nodes)
    total = sphere_area(g.d) * float(np.dot(g.quad_weights, np.abs(f.values) ** p * wv))
    return total ** (1.0 / p)


# ---------------------------------------------------------------------------
# subordination


@dataclass
class SubordinationRule:
    """Trapezoid rule in ``log t`` for a Gamma-type subordination integral."""

    log_t: np.ndarray
    step: float
    direction: str
    s: float
    tail_fraction: float = field(default=math.nan)


def _subordination_kernel(direction: str, s: float, log_t: np.ndarray, lam: np.ndarray) -> np.ndarray:
    # in logs: t^{-s/2} underflows for s near 2, where the rule reaches t ~ e^{-1000}
    log_t = np.asarray(log_t, float)[:, None]
    with np.errstate(divide="ignore"):
        log_l2 = np.log(lam ** 2)[None, :]
    x = np.exp(log_t + log_l2)
    if direction == "positive":
        return np.exp(log_t * (1.0 - s / 2.0) + log_l2 - x) / gamma(1.0 - s / 2.0)
    return np.exp(log_t * (s / 2.0) - x) / gamma(s / 2.0)


def subordination_rule(s: float, direction: str, lam_lo: float, lam_hi: float,
                       step: float = 0.4, tol: float = 1e-13) -> SubordinationRule:
    """Cover the log-t range where the integrand matters for ``lam_lo..lam_hi``.

    Near ``t -> 0`` the integrand decays like ``t^{1-s/2}`` (positive) or
    ``t^{s/2}`` (negative); the range extends until that power falls below
    ``tol``.  Near ``t -> inf`` the decay is Gaussian in ``lam`` and a few
    units of ``log t`` past ``lam_lo^{-2}`` suffice.
    """
    if not 0 < s < 2:
        raise ValueError("need 0 < s < 2")
    if direction not in ("positive", "negative"):
        raise ValueError("direction must be 'positive' or 'negative'")
    rate = 1.0 - s / 2.0 if direction == "positive" else s / 2.0
    u_lo = -2.0 * math.log(lam_hi) + math.log(tol) / rate
    u_hi = -2.0 * math.log(lam_lo) + math.log(-math.log(tol * 1e-3)) + 1.0
    n = int(math.ceil((u_hi - u_lo) / step))
    return SubordinationRule(np.linspace(u_lo, u_lo + n * step, n + 1), step, direction, s)


def subordination_multiplier(lam: np.ndarray, s: float, direction: str,
                             rule: SubordinationRule | None = None,
                             weights: np.ndarray | None = None,
                             tail_tol: float = 1e-9) -> np.ndarray:
    """Effective multiplier of the subordination quadrature at each ``lam``.

    The heat semigroup acts diagonally, so summing ``sum_k h g(t_k) e^{-t_k
    lam^2}`` per ``lam`` equals summing the heat-evolved functions.  The tail
    check compares the outermost decade of ``log t`` at each end with the
    total, weighted by ``weights`` (typically ``|f^|``).
    """
    lam = np.asarray(lam, float)
    if rule is None:
        rule = subordination_rule(s, direction, float(lam.min()), float(lam.max()))
    g = _subordination_kernel(direction, s, rule.log_t, lam) * rule.step
    total = g.sum(axis=0)
    dec = math.log(10.0)
    lo = rule.log_t <= rule.log_t[0] + dec
    hi = rule.log_t >= rule.log_t[-1] - dec
    tail = g[lo].sum(axis=0) + g[hi].sum(axis=0)
    wts = np.ones_like(lam) if weights is None else np.asarray(weights, float)
    denom = float(np.sum(wts * np.abs(total)))
    frac = float(np.sum(wts * tail)) / denom if denom > 0 else 0.0
    rule.tail_fraction = frac
    if not frac < tail_tol:
        raise DivergentSubordinationError(
            f"subordination tail carries {frac:.1e} of the integral (limit {tail_tol:.0e})")
    return total


def fractional_power_subordination(plan: HankelPlan, f, s: float, direction: str,
                                   rule: SubordinationRule | None = None,
                                   collapse: bool = True) -> RadialFunction:
    """``L^{s/2} f`` (positive) or ``L^{-s/2} f`` (negative) by heat subordination.

    With ``collapse=False`` each heat-evolved function is formed in physical
    space and the quadrature is summed there; the result is the same up to
    rounding and serves to check the collapsed path.
    """
    fhat = plan.forward(f)
    if rule is None:
        rule = subordination_rule(s, direction, plan.spectral.lambda_min, plan.spectral.lambda_max)
    w = np.abs(fhat) * plan.spectral.quad_weights
    m = subordination_multiplier(plan.lam, s, direction, rule, weights=w)
    if collapse:
        return plan.inverse(m * fhat)
    acc = np.zeros(plan.radial.size, dtype=complex)
    for uk in rule.log_t:
        coef = _subordination_kernel(direction, s, np.array([uk]), plan.lam)[0] * rule.step
        if np.max(np.abs(coef * fhat)) == 0.0:
            continue
        acc += plan.inverse_values(coef * fhat)
    return RadialFunction(plan.radial, acc)


def fractional_power_spectral(plan: HankelPlan, f, s: float, direction: str) -> RadialFunction:
    """Direct multiplier route ``lam^{+-s}``."""
    sign = 1.0 if direction == "positive" else -1.0
    return apply_multiplier(plan, f, power(sign * s))
