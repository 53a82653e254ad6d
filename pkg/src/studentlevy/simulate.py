"""Synthetic observation paths for the regression and SDE models.

Seeding: a 64-bit seed is expanded with :class:`numpy.random.SeedSequence`
into one child stream per stochastic component (Lévy increments first,
diffusion covariate second), so adding a covariate never changes the jump
noise drawn for the same seed.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import signal

from .errors import DomainError
from .levy import DensityTable, build_density_table, default_grid, sample_increments
from .model import PathSample, SamplingDesign, Theta

__all__ = [
    "RegressorSpec",
    "OUParams",
    "cached_table",
    "simulate_levy_increments",
    "simulate_diffusion_covariate",
    "regressor_matrix",
    "simulate_regression_path",
    "simulate_sde_path",
    "named_drift",
]

LEVY_STREAM = 0
COVARIATE_STREAM = 1


@dataclass(frozen=True)
class OUParams:
    """``dX' = -rate * X' dt + vol dw`` started at ``start``."""

    rate: float = 1.0
    vol: float = 1.0
    start: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate > 0.0):
            raise DomainError("OU mean-reversion rate must be > 0")
        if not (math.isfinite(self.vol) and self.vol >= 0.0):
            raise DomainError("OU volatility must be >= 0")
        if not math.isfinite(self.start):
            raise DomainError("OU start value must be finite")


@dataclass(frozen=True)
class RegressorSpec:
    """Covariate recipe.

    kind:
      ``periodic_pair``   frequencies ``(a, b)`` give ``X = (cos(a t), sin(b t))``
      ``custom_periodic`` each frequency ``f`` contributes ``(cos(f t), sin(f t))``
      ``diffusion_ou``    the time integral of an OU process, appended after
                          any ``periodic_pair`` columns given by ``frequencies``
    """

    kind: str = "periodic_pair"
    frequencies: tuple[float, ...] = (5.0, 1.0)
    ou: OUParams | None = None

    def __post_init__(self):
        freqs = tuple(float(f) for f in self.frequencies)
        object.__setattr__(self, "frequencies", freqs)
        if any(not (math.isfinite(f) and f > 0.0) for f in freqs):
            raise DomainError("periodic frequencies must be positive")
        if self.kind == "periodic_pair":
            if len(freqs) != 2:
                raise DomainError("periodic_pair needs exactly two frequencies")
        elif self.kind == "custom_periodic":
            if not freqs:
                raise DomainError("custom_periodic needs at least one frequency")
        elif self.kind == "diffusion_ou":
            if freqs and len(freqs) != 2:
                raise DomainError("diffusion_ou takes zero or two periodic frequencies")
            if self.ou is None:
                object.__setattr__(self, "ou", OUParams())
        else:
            raise DomainError(f"unknown regressor kind {self.kind!r}")

    @property
    def q(self) -> int:
        if self.kind == "custom_periodic":
            return 2 * len(self.frequencies)
        if self.kind == "diffusion_ou":
            return len(self.frequencies) + 1
        return 2


@functools.lru_cache(maxsize=8)
def cached_table(nu: float, h: float) -> DensityTable:
    """Density table on the default grid, built once per ``(nu, h)``."""
    return build_density_table(nu, h, default_grid(nu, h))


def _table_for(nu, design, table):
    if table is None:
        return cached_table(float(nu), design.h)
    if table.nu != nu or not math.isclose(table.h, design.h, rel_tol=1e-12):
        raise DomainError(
            f"density table is for (nu={table.nu}, h={table.h}), "
            f"path needs (nu={nu}, h={design.h})"
        )
    return table


def _streams(seed):
    return np.random.SeedSequence(int(seed)).spawn(2)


def simulate_levy_increments(table: DensityTable, design: SamplingDesign, seed) -> np.ndarray:
    """Lévy path ``J_{t_j}``, ``j = 0..floor(nT)``, with ``J_0 = 0``."""
    draws = sample_increments(table, design.steps, _streams(seed)[LEVY_STREAM])
    return np.concatenate(([0.0], np.cumsum(design.h * draws)))


def _ou_from_stream(ou: OUParams, design: SamplingDesign, stream) -> np.ndarray:
    h = design.h
    m = design.steps
    z = np.random.default_rng(stream).standard_normal(m)
    decay = 1.0 - ou.rate * h
    # x'_{j+1} = decay * x'_j + vol * sqrt(h) * z_j as a first-order recursive filter
    tail, _ = signal.lfilter([1.0], [1.0, -decay], ou.vol * math.sqrt(h) * z, zi=[decay * ou.start])
    return np.concatenate(([ou.start], tail))


def simulate_diffusion_covariate(ou: OUParams, design: SamplingDesign, seed):
    """Euler–Maruyama OU path ``X'`` and its trapezoidal time integral ``X``.

    Returns ``(X, X')`` on the grid ``t_j = j/n``.  The Wiener noise comes
    from the covariate substream of ``seed``, independent of the Lévy draws.
    """
    if not isinstance(ou, OUParams):
        ou = OUParams(**dict(ou))
    xp = _ou_from_stream(ou, design, _streams(seed)[COVARIATE_STREAM])
    integral = np.concatenate(([0.0], np.cumsum(0.5 * design.h * (xp[1:] + xp[:-1]))))
    return integral, xp


def regressor_matrix(spec: RegressorSpec, design: SamplingDesign, seed=0) -> np.ndarray:
    """Covariate matrix of shape ``(floor(nT) + 1, q)``."""
    t = np.arange(design.steps + 1) * design.h
    cols = []
    if spec.kind in ("periodic_pair", "diffusion_ou") and spec.frequencies:
        a, b = spec.frequencies
        cols += [np.cos(a * t), np.sin(b * t)]
    elif spec.kind == "custom_periodic":
        for f in spec.frequencies:
            cols += [np.cos(f * t), np.sin(f * t)]
    if spec.kind == "diffusion_ou":
        cols.append(simulate_diffusion_covariate(spec.ou, design, seed)[0])
    return np.column_stack(cols)


def simulate_regression_path(
    theta0: Theta,
    design: SamplingDesign,
    regressors: RegressorSpec,
    seed: int,
    table: DensityTable | None = None,
) -> PathSample:
    """``Y_t = X_t . mu + sigma J_t`` observed at ``t_j = j/n``."""
    if regressors.q != theta0.q:
        raise DomainError(f"regressors give q={regressors.q} columns but mu has {theta0.q} entries")
    x = regressor_matrix(regressors, design, seed)
    trend = x @ theta0.mu_array
    if theta0.sigma == 0.0:
        y = trend
    else:
        tab = _table_for(theta0.nu, design, table)
        y = trend + theta0.sigma * simulate_levy_increments(tab, design, seed)
    t = np.arange(design.steps + 1) * design.h
    return PathSample(
        design=design,
        times=t,
        covariates=x,
        responses=y,
        truth=theta0,
        meta={"model": "regression", "seed": int(seed), "regressors": regressors.kind},
    )


def named_drift(name: str) -> Callable[[float], np.ndarray]:
    """Drift functions addressable from config files."""
    drifts = {
        "zero": lambda y: np.zeros(1),
        "neg_tanh": lambda y: np.array([-math.tanh(y)]),
        "neg_atan": lambda y: np.array([-math.atan(y)]),
    }
    try:
        return drifts[name]
    except KeyError:
        raise DomainError(f"unknown drift {name!r}; choose from {sorted(drifts)}") from None


_PROBE_NEAR = np.linspace(-10.0, 10.0, 41)
_PROBE_FAR = np.concatenate([-np.logspace(3, 12, 10), np.logspace(3, 12, 10)])


def _check_bounded(drift, q):
    near = np.array([np.atleast_1d(drift(float(y))) for y in _PROBE_NEAR])
    far = np.array([np.atleast_1d(drift(float(y))) for y in _PROBE_FAR])
    if near.shape[1] != q or far.shape[1] != q:
        raise DomainError(f"drift must return {q} values, one per entry of mu")
    if not (np.all(np.isfinite(near)) and np.all(np.isfinite(far))):
        raise DomainError("drift returned non-finite values")
    # a bounded drift cannot keep growing far from the origin
    scale = 1.0 + np.abs(near).max()
    if np.abs(far).max() > 10.0 * scale:
        raise DomainError("drift appears unbounded; the SDE model needs a bounded b")


def simulate_sde_path(
    mu0,
    sigma0: float,
    nu0: float,
    drift: Callable[[float], np.ndarray],
    design: SamplingDesign,
    seed: int,
    table: DensityTable | None = None,
) -> PathSample:
    """Euler scheme for ``dY = mu . b(Y) dt + sigma dJ`` with ``Y_0 = 0``.

    The covariate column holds the Euler drift integral
    ``X_{t_j} = h sum_{k<j} b(Y_{t_k})`` so that its increments over one step
    are exactly the drift evaluations used by the scheme; ``drift`` on the
    returned path holds ``b(Y_{t_j})`` itself.
    """
    theta = Theta(mu0, sigma0, nu0)
    if not sigma0 > 0.0:
        raise DomainError("sigma0 must be > 0")
    _check_bounded(drift, theta.q)
    if nu0 <= 2.0:
        warnings.warn(
            f"nu0={nu0} <= 2: outside the finite-variance regime assumed by the SDE theory",
            RuntimeWarning,
            stacklevel=2,
        )
    tab = _table_for(nu0, design, table)
    levy = simulate_levy_increments(tab, design, seed)
    h = design.h
    mu = theta.mu_array
    m = design.steps
    y = np.empty(m + 1)
    b = np.empty((m + 1, theta.q))
    drift_sum = 0.0
    y[0] = 0.0
    for j in range(m):
        b[j] = drift(y[j])
        drift_sum += h * float(mu @ b[j])
        # keep the noise as sigma * J so that b = 0 reproduces sigma * J bit for bit
        y[j + 1] = sigma0 * levy[j + 1] + drift_sum
    b[m] = drift(y[m])
    x = np.vstack([np.zeros((1, theta.q)), h * np.cumsum(b[:-1], axis=0)])
    return PathSample(
        design=design,
        times=np.arange(m + 1) * h,
        covariates=x,
        responses=y,
        truth=theta,
        drift=b,
        meta={"model": "sde", "seed": int(seed)},
    )
