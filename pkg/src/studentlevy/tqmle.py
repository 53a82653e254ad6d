"""Stage two: Student-t quasi-likelihood for the degrees of freedom.

Unit-time residuals ``eps_i`` are fed to the log-likelihood of the law with
density ``Gamma((nu+1)/2) / (sqrt(pi) Gamma(nu/2)) (1 + x^2)^(-(nu+1)/2)``.
Its derivative in ``nu`` vanishes where

    psi((nu + 1)/2) - psi(nu/2) = mean(log(1 + eps_i^2)),

and the left side decreases strictly from +inf to 0, so the maximizer is a
bracketed root.  The curvature does not depend on the data at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import specfun
from .errors import DomainError
from .model import PathSample

__all__ = [
    "ResidualSet",
    "TqmleFit",
    "unit_residuals",
    "student_loglik",
    "student_score",
    "score_gap",
    "fit_tqmle",
    "DEFAULT_NU_BOUNDS",
]

DEFAULT_NU_BOUNDS = (0.05, 100.0)


@dataclass(eq=False)
class ResidualSet:
    values: np.ndarray
    mu_hat: np.ndarray | None = None
    sigma_hat: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.size == 0:
            raise DomainError("residual set is empty")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("residuals must be finite")

    @property
    def count(self) -> int:
        return self.values.size

    @property
    def mbar(self) -> float:
        return float(np.mean(np.log1p(self.values**2)))


@dataclass
class TqmleFit:
    nu_hat: float
    mbar: float
    converged: bool
    boundary_flag: str  # "none", "lower" or "upper"
    score: float
    iterations: int
    count: int


def unit_residuals(path: PathSample, mu_hat, sigma_hat: float) -> ResidualSet:
    """``(Y_i - Y_{i-1} - mu . (X_i - X_{i-1})) / sigma`` at ``i = 1..floor(T)``."""
    if not (math.isfinite(sigma_hat) and sigma_hat > 0.0):
        raise DomainError("sigma_hat must be > 0")
    design = path.design
    units = design.units
    if units < 1:
        raise DomainError("the path must cover at least one unit of time")
    idx = np.arange(units + 1) * design.n
    if idx[-1] >= path.responses.size:
        raise DomainError("path is shorter than its design horizon")
    mu = np.atleast_1d(np.asarray(mu_hat, dtype=float))
    dy = np.diff(path.responses[idx])
    dx = np.diff(path.covariates[idx], axis=0)
    return ResidualSet((dy - dx @ mu) / sigma_hat, mu_hat=mu, sigma_hat=float(sigma_hat))


def _values(residuals):
    if isinstance(residuals, ResidualSet):
        return residuals.values
    return ResidualSet(residuals).values


def _check_nu(nu):
    if not (math.isfinite(nu) and nu > 0.0):
        raise DomainError("nu must be > 0")


def student_loglik(nu: float, residuals) -> float:
    """Exact Student-t log-likelihood of the residuals at ``nu``."""
    _check_nu(nu)
    e = _values(residuals)
    const = specfun.log_gamma(0.5 * (nu + 1.0)) - specfun.log_gamma(0.5 * nu) - 0.5 * math.log(math.pi)
    return float(e.size * const - 0.5 * (nu + 1.0) * np.log1p(e * e).sum())


def score_gap(nu: float) -> float:
    """``psi((nu+1)/2) - psi(nu/2)``, strictly decreasing from +inf to 0."""
    _check_nu(nu)
    return specfun.digamma(0.5 * (nu + 1.0)) - specfun.digamma(0.5 * nu)


def student_score(nu: float, residuals) -> float:
    """Derivative of :func:`student_loglik` in ``nu``."""
    e = _values(residuals)
    return 0.5 * e.size * (score_gap(nu) - float(np.mean(np.log1p(e * e))))


def fit_tqmle(residuals, bounds=DEFAULT_NU_BOUNDS, max_iter: int = 100) -> TqmleFit:
    """Maximize :func:`student_loglik` over ``bounds``.

    Safeguarded Newton on ``score_gap(nu) = mbar`` inside a shrinking bracket.
    When ``mbar`` lies outside the range the bounds can reach, the matching
    bound is returned with ``boundary_flag`` set; this includes ``mbar = 0``.
    """
    lo, hi = (float(b) for b in bounds)
    if not (math.isfinite(lo) and math.isfinite(hi) and 0.0 < lo < hi):
        raise DomainError("nu bounds must satisfy 0 < nu_min < nu_max < inf")
    e = _values(residuals)
    count = e.size
    mbar = float(np.mean(np.log1p(e * e)))

    def result(nu, conv, flag, it):
        return TqmleFit(nu, mbar, conv, flag, 0.5 * count * (score_gap(nu) - mbar), it, count)

    f_lo = score_gap(lo) - mbar
    f_hi = score_gap(hi) - mbar
    if f_lo <= 0.0:
        return result(lo, True, "lower", 0)
    if f_hi >= 0.0:
        return result(hi, True, "upper", 0)

    # start from the large-nu expansion psi((nu+1)/2) - psi(nu/2) ~ 1/nu
    nu = min(max(1.0 / mbar, lo), hi)
    a, b = lo, hi
    tiny = 4.0 * np.finfo(float).eps * max(1.0, mbar)
    for it in range(1, max_iter + 1):
        f = score_gap(nu) - mbar
        if abs(f) <= tiny:
            return result(nu, True, "none", it)
        if f > 0.0:
            a = nu
        else:
            b = nu
        slope = 0.5 * (specfun.trigamma(0.5 * (nu + 1.0)) - specfun.trigamma(0.5 * nu))
        step = nu - f / slope
        # bisect in log space when Newton leaves the bracket
        nu = step if a < step < b else math.sqrt(a * b)
        if b - a <= 2.0 * np.finfo(float).eps * b:
            break
    f = score_gap(nu) - mbar
    return result(nu, abs(f) <= 1e3 * tiny, "none", max_iter)
