"""Asymptotic covariances, studentization and Wald intervals.

The trend/scale estimator is asymptotically normal at rate ``sqrt(N)`` with
information ``blockdiag(S / (2 sigma^2), 1 / (2 sigma^2))`` where ``S`` is the
mean outer product of ``dX / h``; the degrees of freedom estimator is normal
at rate ``sqrt(T)`` with information ``(psi_1(nu/2) - psi_1((nu+1)/2)) / 4``.
The two blocks are asymptotically independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import specfun
from .cqmle import CqmleFit, fit_cqmle, stage_one_data
from .errors import DomainError, IdentifiabilityError
from .model import PathSample, SamplingDesign, Theta
from .tqmle import DEFAULT_NU_BOUNDS, TqmleFit, fit_tqmle, unit_residuals

__all__ = [
    "FitResult",
    "covariate_gram",
    "fisher_nu",
    "gamma_a",
    "sym_sqrt",
    "param_names",
    "studentize",
    "log_sigma_statistic",
    "standard_errors",
    "confidence_intervals",
    "fit_two_stage",
]


def covariate_gram(path: PathSample, design: SamplingDesign) -> np.ndarray:
    """``(1/N) sum_j (dX_j / h)(dX_j / h)^T`` over the stage-one window."""
    _, w = stage_one_data(path, design)
    return w.T @ w / w.shape[0]


def fisher_nu(nu: float) -> float:
    """Fisher information for the degrees of freedom of the unit-time law."""
    if not (math.isfinite(nu) and nu > 0.0):
        raise DomainError("nu must be > 0")
    return 0.25 * (specfun.trigamma(0.5 * nu) - specfun.trigamma(0.5 * (nu + 1.0)))


def gamma_a(S: np.ndarray, sigma: float) -> np.ndarray:
    S = np.atleast_2d(np.asarray(S, dtype=float))
    q = S.shape[0]
    out = np.zeros((q + 1, q + 1))
    out[:q, :q] = 0.5 * (S + S.T) / (2.0 * sigma**2)
    out[q, q] = 1.0 / (2.0 * sigma**2)
    return out


def sym_sqrt(m: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root by eigendecomposition."""
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def param_names(q: int) -> list[str]:
    return [f"mu_{k + 1}" for k in range(q)] + ["sigma", "nu"]


@dataclass(eq=False)
class FitResult:
    theta_hat: Theta
    S_hat: np.ndarray
    gamma_a: np.ndarray
    gamma_nu: float
    N: int
    T: float
    stage_one: CqmleFit | None = None
    stage_two: TqmleFit | None = None
    warnings: list = field(default_factory=list)

    @property
    def q(self) -> int:
        return self.theta_hat.q


def _check_gamma_a(g):
    q = g.shape[0] - 1
    ev = np.linalg.eigvalsh(g[:q, :q])
    if ev[0] <= 1e-12 * max(ev[-1], 0.0) or ev[-1] <= 0.0:
        raise IdentifiabilityError("information block for mu (S_hat / (2 sigma^2)) is singular")
    if not g[q, q] > 0.0:
        raise IdentifiabilityError("information entry for sigma is not positive")


def studentize(fit: FitResult, theta0: Theta) -> np.ndarray:
    """Studentized errors ``(mu_1..mu_q, sigma, nu)``, approximately N(0, I)."""
    if theta0.q != fit.q:
        raise DomainError("theta0 and the fit disagree on the number of trend parameters")
    _check_gamma_a(fit.gamma_a)
    a_hat = np.append(fit.theta_hat.mu_array, fit.theta_hat.sigma)
    a0 = np.append(theta0.mu_array, theta0.sigma)
    za = sym_sqrt(fit.gamma_a) @ (math.sqrt(fit.N) * (a_hat - a0))
    zn = math.sqrt(fit.gamma_nu) * math.sqrt(fit.T) * (fit.theta_hat.nu - theta0.nu)
    return np.append(za, zn)


def log_sigma_statistic(sigma_hat: float, sigma0: float, N: int) -> float:
    """``sqrt(N/2) log(sigma_hat / sigma0)``, a variance-stabilized scale error."""
    return math.sqrt(0.5 * N) * math.log(sigma_hat / sigma0)


def standard_errors(fit: FitResult) -> np.ndarray:
    _check_gamma_a(fit.gamma_a)
    var_a = np.diag(np.linalg.inv(fit.gamma_a)) / fit.N
    var_nu = 1.0 / (fit.gamma_nu * fit.T)
    return np.sqrt(np.append(var_a, var_nu))


def confidence_intervals(fit: FitResult, level: float = 0.95) -> dict:
    """Per-parameter Wald intervals from the inverse information blocks."""
    if not 0.0 < level < 1.0:
        raise DomainError("level must lie in (0, 1)")
    z = stats.norm.ppf(0.5 + 0.5 * level)
    est = np.append(fit.theta_hat.mu_array, [fit.theta_hat.sigma, fit.theta_hat.nu])
    se = standard_errors(fit)
    return {
        name: (float(e - z * s), float(e + z * s))
        for name, e, s in zip(param_names(fit.q), est, se)
    }


def fit_two_stage(
    path: PathSample,
    design: SamplingDesign | None = None,
    nu_bounds=DEFAULT_NU_BOUNDS,
    **cqmle_kw,
) -> FitResult:
    """Stage one on ``[0, B]``, unit-time residuals on ``[0, T]``, stage two."""
    design = design or path.design
    one = fit_cqmle(path, design, **cqmle_kw)
    res = unit_residuals(path, one.mu_hat, one.sigma_hat)
    two = fit_tqmle(res, nu_bounds)
    notes = list(design.advisories())
    if not one.converged:
        notes.append("stage-one fit did not converge: " + (", ".join(one.flags) or "no flag"))
    if two.boundary_flag != "none":
        notes.append(f"nu estimate sits on its {two.boundary_flag} bound")
    S = covariate_gram(path, design)
    theta = Theta(one.mu_hat, one.sigma_hat, two.nu_hat)
    return FitResult(
        theta_hat=theta,
        S_hat=S,
        gamma_a=gamma_a(S, one.sigma_hat),
        gamma_nu=fisher_nu(two.nu_hat),
        N=design.N,
        T=float(design.T),
        stage_one=one,
        stage_two=two,
        warnings=notes,
    )
