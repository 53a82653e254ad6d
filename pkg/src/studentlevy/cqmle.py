"""Stage one: Cauchy quasi-likelihood for the trend and scale.

The increments over ``[0, B]`` are treated as if ``(dY - mu . dX) / (h sigma)``
were standard Cauchy.  With ``eps_j`` that standardized residual and
``g(e) = -2e / (1 + e^2)`` the log-density derivative of the Cauchy law,

    H(mu, sigma) = sum_j [ -log(h sigma) - log(pi) - log(1 + eps_j^2) ]
    dH/dmu       = -(1/sigma) sum_j g(eps_j) w_j,          w_j = dX_j / h
    dH/dsigma    = -(1/sigma) sum_j (1 + eps_j g(eps_j))
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, IdentifiabilityError, NonConvergence
from .model import PathSample, SamplingDesign

__all__ = [
    "CqmleFit",
    "stage_one_data",
    "cauchy_loglik",
    "cauchy_score",
    "cauchy_score_hessian",
    "fit_cqmle",
    "fit_cqmle_multistart",
]

GRAM_RCOND = 1e-12


@dataclass(eq=False)
class CqmleFit:
    mu_hat: np.ndarray
    sigma_hat: float
    gradient_norm: float
    hessian: np.ndarray  # -d^2 H / N at the estimate, (mu, sigma) coordinates
    iterations: int
    converged: bool
    loglik: float = float("nan")
    N: int = 0
    flags: list = field(default_factory=list)


def stage_one_data(path: PathSample, design: SamplingDesign):
    """``(dY, dX / h)`` for exactly the first ``N = floor(n B)`` increments."""
    N = design.N
    q = path.q
    if N < q + 2:
        raise DomainError(f"stage one needs N >= q + 2 = {q + 2} increments, design gives N = {N}")
    dy, dx = path.increments(N)
    return dy, dx / design.h


def _unpack(a):
    mu, sigma = a
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    sigma = float(sigma)
    if not (math.isfinite(sigma) and sigma > 0.0):
        raise DomainError("sigma must be > 0")
    return mu, sigma


def _loglik(mu, sigma, dy, w, h):
    eps = (dy - h * (w @ mu)) / (h * sigma)
    return -dy.size * (math.log(h * sigma) + math.log(math.pi)) - np.log1p(eps * eps).sum()


def cauchy_score(eps):
    """``g = d/dy log f`` for the standard Cauchy density ``f``, and ``dg/dy``."""
    eps = np.asarray(eps, dtype=float)
    e2 = eps * eps
    return -2.0 * eps / (1.0 + e2), -2.0 * (1.0 - e2) / (1.0 + e2) ** 2


def _derivatives(mu, sigma, dy, w, h):
    eps = (dy - h * (w @ mu)) / (h * sigma)
    e2 = eps * eps
    g, dg = cauchy_score(eps)
    q = mu.size
    grad = np.empty(q + 1)
    grad[:q] = -(g @ w) / sigma
    grad[q] = -(1.0 + eps * g).sum() / sigma
    hess = np.empty((q + 1, q + 1))
    hess[:q, :q] = (w.T * dg) @ w / sigma**2
    cross = ((g + eps * dg) @ w) / sigma**2
    hess[:q, q] = cross
    hess[q, :q] = cross
    hess[q, q] = (1.0 + 2.0 * eps * g + e2 * dg).sum() / sigma**2
    hess[:q, :q] = 0.5 * (hess[:q, :q] + hess[:q, :q].T)
    return grad, hess


def cauchy_loglik(a, path: PathSample, design: SamplingDesign) -> float:
    """Cauchy quasi-log-likelihood of ``a = (mu, sigma)``, constants included."""
    mu, sigma = _unpack(a)
    dy, w = stage_one_data(path, design)
    return float(_loglik(mu, sigma, dy, w, design.h))


def cauchy_score_hessian(a, path: PathSample, design: SamplingDesign):
    """Gradient and Hessian of :func:`cauchy_loglik` in ``(mu, sigma)``."""
    mu, sigma = _unpack(a)
    dy, w = stage_one_data(path, design)
    return _derivatives(mu, sigma, dy, w, design.h)


def _check_gram(w):
    gram = w.T @ w / w.shape[0]
    ev = np.linalg.eigvalsh(gram)
    if not np.all(np.isfinite(ev)) or ev[-1] <= 0.0 or ev[0] <= GRAM_RCOND * ev[-1]:
        raise IdentifiabilityError(
            "covariate Gram matrix of the stage-one window is numerically singular "
            f"(eigenvalues {ev.tolist()})"
        )
    return gram


def _initial(dy, w, h, em_steps=50):
    # least squares for the trend, then the median absolute residual for the
    # scale (the median of |standard Cauchy| is one)
    mu = np.linalg.lstsq(h * w, dy, rcond=None)[0]
    r = dy - h * (w @ mu)
    s = float(np.median(np.abs(r)))
    if not s > 0.0:
        s = float(np.mean(np.abs(r))) or h
    # EM for the Cauchy location-scale regression: every step raises the
    # likelihood, which pulls a least-squares start wrecked by outliers back
    # into the basin of the maximum before Newton takes over
    X = h * w
    for _ in range(em_steps):
        wt = 2.0 / (1.0 + (r / s) ** 2)
        mu_new = np.linalg.lstsq(X * np.sqrt(wt)[:, None], dy * np.sqrt(wt), rcond=None)[0]
        r = dy - X @ mu_new
        s_new = math.sqrt(float(np.mean(2.0 / (1.0 + (r / s) ** 2) * r * r)))
        done = np.max(np.abs(mu_new - mu)) <= 1e-6 * (1.0 + np.max(np.abs(mu))) and abs(s_new - s) <= 1e-6 * s
        mu, s = mu_new, s_new
        if done or not s > 0.0:
            break
    return mu, max(s, 1e-300) / h


def _box(bounds, q):
    lo = np.full(q + 1, -np.inf)
    hi = np.full(q + 1, np.inf)
    if bounds is not None:
        mu_b, sig_b = bounds
        if mu_b is not None:
            mu_b = np.asarray(mu_b, dtype=float).reshape(q, 2)
            lo[:q], hi[:q] = mu_b[:, 0], mu_b[:, 1]
        if sig_b is not None:
            if not 0.0 < sig_b[0] < sig_b[1]:
                raise DomainError("sigma bounds must satisfy 0 < lower < upper")
            lo[q], hi[q] = math.log(sig_b[0]), math.log(sig_b[1])
    if np.any(lo >= hi):
        raise DomainError("every box lower bound must lie below its upper bound")
    return lo, hi


def fit_cqmle(
    path: PathSample,
    design: SamplingDesign,
    init=None,
    bounds=None,
    tol: float = 1e-8,
    max_iter: int = 200,
    strict: bool = False,
) -> CqmleFit:
    """Maximize the Cauchy quasi-likelihood by safeguarded Newton ascent.

    Iterates in ``z = (mu, log sigma)``.  ``bounds = (mu_bounds, sigma_bounds)``
    with ``mu_bounds`` a ``q x 2`` array and ``sigma_bounds = (lo, hi)``; either
    may be None.  The iteration stops once the per-increment gradient
    ``max |grad H| / N`` is at most ``tol``.  A fit that stops for any other
    reason comes back with ``converged=False`` (or raises
    :class:`NonConvergence` when ``strict``).
    """
    dy, w = stage_one_data(path, design)
    h = design.h
    N, q = w.shape
    _check_gram(w)
    lo, hi = _box(bounds, q)

    if init is None:
        mu0, sig0 = _initial(dy, w, h)
    else:
        mu0, sig0 = _unpack(init)
        if mu0.size != q:
            raise DomainError(f"init mu has {mu0.size} entries, path has q = {q}")
    z = np.clip(np.append(mu0, math.log(sig0)), lo, hi)

    def value(z):
        return _loglik(z[:q], math.exp(z[q]), dy, w, h) / N

    def zderivs(z):
        sigma = math.exp(z[q])
        g, H = _derivatives(z[:q], sigma, dy, w, h)
        gz = g.copy()
        gz[q] = sigma * g[q]
        Hz = H.copy()
        Hz[:q, q] *= sigma
        Hz[q, :q] *= sigma
        Hz[q, q] = sigma * sigma * H[q, q] + sigma * g[q]
        return g / N, gz / N, Hz / N

    f = value(z)
    flags = []
    converged = False
    it = 0
    while True:
        g, gz, Hz = zderivs(z)
        gnorm = float(np.max(np.abs(g)))
        at_lo, at_hi = z <= lo, z >= hi
        # components pinned at the box that push outward do not count
        free = ~((at_lo & (gz < 0)) | (at_hi & (gz > 0)))
        if gnorm <= tol:
            converged = True
            break
        if not free.all() and float(np.max(np.abs(gz[free]), initial=0.0)) <= tol:
            break  # optimal on the box boundary; flagged below
        if it >= max_iter:
            break
        it += 1
        try:
            chol = np.linalg.cholesky(-Hz)
            d = np.linalg.solve(chol.T, np.linalg.solve(chol, gz))
        except np.linalg.LinAlgError:
            d = gz / max(1.0, float(np.abs(np.diag(Hz)).max()))
        if gz @ d <= 0.0:
            d = gz / max(1.0, float(np.abs(np.diag(Hz)).max()))
        slope = float(gz @ d)
        step = 1.0
        accepted = False
        for _ in range(60):
            z_new = np.clip(z + step * d, lo, hi)
            f_new = value(z_new)
            if f_new >= f + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # at the optimum the likelihood is flat to rounding; take the full
            # Newton step if it does not lose more than rounding noise
            z_new = np.clip(z + d, lo, hi)
            f_new = value(z_new)
            if f_new < f - 64 * np.finfo(float).eps * max(1.0, abs(f)):
                flags.append("line_search_failed")
                break
        if np.array_equal(z_new, z):
            flags.append("stalled")
            break
        z, f = z_new, f_new

    if np.any(z <= lo) or np.any(z >= hi):
        flags.append("boundary")
        converged = False
    mu_hat = z[:q].copy()
    sigma_hat = math.exp(z[q])
    g, H = _derivatives(mu_hat, sigma_hat, dy, w, h)
    hess = -H / N
    gnorm = float(np.max(np.abs(g / N)))
    if converged and np.linalg.eigvalsh(hess)[0] < -1e-10 * max(1.0, np.abs(hess).max()):
        converged = False
        flags.append("not_a_maximum")
    if not converged and it >= max_iter:
        flags.append("max_iter")
    fit = CqmleFit(
        mu_hat=mu_hat,
        sigma_hat=sigma_hat,
        gradient_norm=gnorm,
        hessian=hess,
        iterations=it,
        converged=converged,
        loglik=float(f * N),
        N=N,
        flags=flags,
    )
    if strict and not converged:
        raise NonConvergence(f"stage-one Newton stopped after {it} iterations ({', '.join(flags) or 'no flag'})")
    return fit


def fit_cqmle_multistart(path, design, inits, tol_agree: float = 1e-6, **kw) -> CqmleFit:
    """Fit from the default start and every entry of ``inits``; keep the best.

    Converged fits whose estimates differ by more than ``tol_agree`` (relative)
    add a ``multistart_disagreement`` flag instead of being reconciled.
    """
    fits = [fit_cqmle(path, design, **kw)] + [fit_cqmle(path, design, init=a, **kw) for a in inits]
    good = [f for f in fits if f.converged] or fits
    best = max(good, key=lambda f: f.loglik)
    ref = np.append(best.mu_hat, best.sigma_hat)
    for f in good:
        est = np.append(f.mu_hat, f.sigma_hat)
        if np.max(np.abs(est - ref) / np.maximum(1.0, np.abs(ref))) > tol_agree:
            best.flags.append("multistart_disagreement")
            break
    return best
