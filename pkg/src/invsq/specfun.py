"""Special functions used throughout the package.

Gamma comes from the standard library; the Bessel functions are thin,
validated wrappers around ``scipy.special`` (AMOS/Cephes), which already
evaluates in exponentially scaled form.  Gegenbauer polynomials are evaluated
by the three-term recurrence.

All functions are pure and accept numpy arrays where noted.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special as _sp

__all__ = [
    "SpecialFunctionError",
    "gamma",
    "bessel_i_scaled",
    "bessel_i_scaled_complex",
    "bessel_j",
    "bessel_j_prime",
    "gegenbauer",
    "gegenbauer_table",
    "check_order",
]

# Largest x with finite Gamma(x) in double precision.
_GAMMA_XMAX = 171.62437695630272


class SpecialFunctionError(ValueError):
    """Raised for arguments outside the domain of a special function."""


def check_order(nu: float) -> float:
    """Validate a Bessel order (the Friedrichs branch needs ``nu >= 0``)."""
    nu = float(nu)
    if not math.isfinite(nu):
        raise SpecialFunctionError(f"Bessel order must be finite, got {nu!r}")
    if nu < 0:
        raise SpecialFunctionError(f"negative Bessel order {nu} is not supported")
    return nu


def _check_argument(z):
    z = np.asarray(z, dtype=float)
    if np.any(np.isnan(z)):
        raise SpecialFunctionError("NaN argument")
    if np.any(z < 0):
        raise SpecialFunctionError("Bessel argument must be >= 0")
    return z


def _unwrap(z):
    return float(z) if np.ndim(z) == 0 else z


def gamma(x: float) -> float:
    """Gamma function of a real argument.

    Raises
    ------
    SpecialFunctionError
        At the poles ``x = 0, -1, -2, ...``.
    OverflowError
        When ``Gamma(x)`` exceeds the double-precision range.
    """
    x = float(x)
    if not math.isfinite(x):
        raise SpecialFunctionError(f"gamma needs a finite argument, got {x!r}")
    if x <= 0 and x == math.floor(x):
        raise SpecialFunctionError(f"gamma has a pole at {x}")
    if x > _GAMMA_XMAX:
        raise OverflowError(f"gamma({x}) overflows double precision")
    return math.gamma(x)


def bessel_i_scaled(nu: float, z):
    r"""Exponentially scaled modified Bessel function :math:`e^{-z} I_\nu(z)`.

    Bounded by one for every admissible input, so it is safe at the huge
    arguments ``r*rho/(2t)`` that appear as ``t -> 0``.
    """
    nu = check_order(nu)
    z = _check_argument(z)
    return _unwrap(_sp.ive(nu, z))


def bessel_i_scaled_complex(nu: float, z):
    r"""``exp(-|Re z|) I_nu(z)`` for complex ``z`` (principal branch)."""
    nu = check_order(nu)
    z = np.asarray(z, dtype=complex)
    if np.any(np.isnan(z)):
        raise SpecialFunctionError("NaN argument")
    out = _sp.ive(nu, z)
    return complex(out) if np.ndim(out) == 0 else out


def bessel_j(nu: float, z):
    """Bessel function of the first kind ``J_nu(z)`` for ``z >= 0``."""
    nu = check_order(nu)
    z = _check_argument(z)
    return _unwrap(_sp.jv(nu, z))


def bessel_j_prime(nu: float, z):
    """Derivative ``J_nu'(z)``.

    Uses ``J_nu' = (nu/z) J_nu - J_{nu+1}`` away from the origin and the
    analytic limit at ``z = 0``.
    """
    nu = check_order(nu)
    z = _check_argument(z)
    zz = np.atleast_1d(z)
    out = np.empty_like(zz)
    pos = zz > 0
    zp = zz[pos]
    out[pos] = nu / zp * _sp.jv(nu, zp) - _sp.jv(nu + 1.0, zp)
    if nu == 0.0 or nu > 1.0:
        limit = 0.0
    elif nu == 1.0:
        limit = 0.5
    else:
        limit = math.inf
    out[~pos] = limit
    return _unwrap(out.reshape(np.shape(z)))


def gegenbauer(ell: int, lam: float, x):
    """Gegenbauer polynomial ``C_ell^lam(x)`` by the three-term recurrence."""
    ell = int(ell)
    if ell < 0:
        raise SpecialFunctionError("degree must be >= 0")
    if not lam > 0:
        raise SpecialFunctionError("lambda must be > 0")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0):
        raise SpecialFunctionError("|x| must be <= 1")
    return _unwrap(gegenbauer_table(ell, lam, x)[ell])


def gegenbauer_table(ell_max: int, lam: float, x) -> np.ndarray:
    """All ``C_l^lam(x)`` for ``l = 0..ell_max``; shape ``(ell_max+1,) + x.shape``."""
    x = np.asarray(x, dtype=float)
    out = np.empty((ell_max + 1,) + x.shape)
    out[0] = 1.0
    if ell_max >= 1:
        out[1] = 2.0 * lam * x
    for n in range(2, ell_max + 1):
        out[n] = (2.0 * x * (n + lam - 1.0) * out[n - 1] - (n + 2.0 * lam - 2.0) * out[n - 2]) / n
    return out
