"""Scalar special functions: log-gamma, digamma, trigamma and scaled Bessel K.

All functions accept scalars or arrays and return the same shape. Inputs are
validated up front: non-finite or out-of-domain arguments raise
:class:`~studentlevy.errors.DomainError` instead of producing NaN.

The numerical kernels are the Cephes/AMOS routines shipped with
``scipy.special``; this module adds the domain checks and a log-space Bessel
evaluation that stays finite where ``K_r(x)`` itself overflows.
"""

from __future__ import annotations

import numpy as np
from scipy import special

from .errors import DomainError

__all__ = [
    "log_gamma",
    "digamma",
    "trigamma",
    "bessel_k_scaled",
    "log_bessel_k_scaled",
]


def _as_positive(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    if np.any(arr <= 0.0):
        raise DomainError(f"{name} must be > 0")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def log_gamma(x):
    """Natural log of the gamma function for x > 0."""
    return _out(special.gammaln(_as_positive(x)))


def digamma(x):
    """Digamma function psi(x) = d/dx log Gamma(x) for x > 0."""
    return _out(special.digamma(_as_positive(x)))


def trigamma(x):
    """Trigamma function psi_1(x) = d/dx psi(x) for x > 0."""
    return _out(special.polygamma(1, _as_positive(x)))


def _check_order(order):
    r = np.asarray(order, dtype=float)
    if not np.all(np.isfinite(r)):
        raise DomainError("order must be finite")
    if np.any(r < 0.0):
        raise DomainError("order must be >= 0 (K is even in its order; reflect first)")
    return r


def bessel_k_scaled(order, x):
    """Exponentially scaled modified Bessel function ``exp(x) * K_order(x)``.

    Finite for every x > 0 as long as the unscaled small-x growth
    ``Gamma(r) 2**(r-1) x**-r`` fits in a double; past that point an
    ``OverflowError`` points the caller at :func:`log_bessel_k_scaled`.
    """
    r = _check_order(order)
    xx = _as_positive(x)
    val = special.kve(r, xx)
    if not np.all(np.isfinite(val)):
        raise OverflowError(
            "exp(x)*K_r(x) overflows a double here; use log_bessel_k_scaled"
        )
    return _out(val)


def _log_k_small_x(r, x):
    # Leading terms of the ascending series; only reached when kve overflows,
    # i.e. x**2 / r is astronomically small, so three terms are plenty.
    lead = special.gammaln(r) + r * (np.log(2.0) - np.log(x)) - np.log(2.0) + x
    big = r > 2.0
    q = 0.25 * x[big] ** 2
    rb = r[big]
    lead[big] += np.log(1.0 - q / (rb - 1.0) + q * q / (2.0 * (rb - 1.0) * (rb - 2.0)))
    return lead


def log_bessel_k_scaled(order, x):
    """``log(exp(x) * K_order(x))`` without intermediate overflow."""
    r, xx = np.broadcast_arrays(_check_order(order), _as_positive(x))
    val = special.kve(r, xx)
    out = np.empty(np.shape(val))
    ok = np.isfinite(val) & (val > 0.0)
    out[ok] = np.log(val[ok])
    if not np.all(ok):
        out[~ok] = _log_k_small_x(r[~ok], xx[~ok])
    return _out(out)
