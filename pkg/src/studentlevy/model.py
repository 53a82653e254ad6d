"""Parameter, sampling-design and path containers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = ["Theta", "SamplingDesign", "PathSample"]


@dataclass(frozen=True)
class Theta:
    """Trend vector ``mu``, scale ``sigma`` and degrees of freedom ``nu``.

    ``sigma = 0`` is accepted so that noise-free paths can be simulated for
    testing; the likelihoods themselves require ``sigma > 0``.
    """

    mu: tuple[float, ...]
    sigma: float
    nu: float

    def __post_init__(self):
        mu = tuple(float(m) for m in np.atleast_1d(self.mu))
        object.__setattr__(self, "mu", mu)
        if not mu or not all(math.isfinite(m) for m in mu):
            raise DomainError("mu must be a non-empty vector of finite numbers")
        if not (math.isfinite(self.sigma) and self.sigma >= 0.0):
            raise DomainError("sigma must be >= 0")
        if not (math.isfinite(self.nu) and self.nu > 0.0):
            raise DomainError("nu must be > 0")

    @property
    def q(self) -> int:
        return len(self.mu)

    @property
    def mu_array(self) -> np.ndarray:
        return np.asarray(self.mu)


def _floor(x: float) -> int:
    # guard against n*T landing a hair below an integer, e.g. 100 * 0.29
    return int(math.floor(x + 1e-9))


@dataclass(frozen=True)
class SamplingDesign:
    """Observation grid ``t_j = j/n`` on ``[0, T]``; stage one uses ``[0, B]``."""

    n: int
    T: float
    B: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError("n must be a positive integer")
        object.__setattr__(self, "n", int(self.n))
        if not (math.isfinite(self.T) and self.T > 0.0):
            raise DomainError("T must be positive")
        if not (math.isfinite(self.B) and self.B > 0.0):
            raise DomainError("B must be positive")
        if self.B > self.T:
            raise DomainError(f"thinning horizon B={self.B} exceeds horizon T={self.T} (need B <= T)")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def N(self) -> int:
        """Number of increments used in stage one, ``floor(n B)``."""
        return _floor(self.n * self.B)

    @property
    def steps(self) -> int:
        """Number of increments on the whole horizon, ``floor(n T)``."""
        return _floor(self.n * self.T)

    @property
    def units(self) -> int:
        """Number of unit-time residuals, ``floor(T)``."""
        return _floor(self.T)

    def advisories(self) -> list[str]:
        """Non-fatal notes on how far the design is from the asymptotic regime."""
        notes = []
        if self.B / self.T > 0.5:
            notes.append(
                f"B/T = {self.B / self.T:.3g} is large; stage-one and stage-two "
                "estimators may be correlated"
            )
        if self.N and self.T / self.N > 0.1:
            notes.append(f"T/N = {self.T / self.N:.3g} is large; residual noise may bias nu")
        return notes


@dataclass(eq=False)
class PathSample:
    """A discretely observed path ``(t_j, X_{t_j}, Y_{t_j})``, ``j = 0..floor(nT)``.

    For the Markov/SDE model ``covariates`` holds the Euler drift integral
    ``h * sum_{k<j} b(Y_{t_k})`` and ``drift`` the evaluations ``b(Y_{t_j})``.
    """

    design: SamplingDesign
    times: np.ndarray
    covariates: np.ndarray
    responses: np.ndarray
    truth: Theta | None = None
    drift: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.responses = np.asarray(self.responses, dtype=float)
        cov = np.asarray(self.covariates, dtype=float)
        if cov.ndim == 1:
            cov = cov[:, None]
        self.covariates = cov
        m = self.times.size
        if self.responses.shape != (m,) or cov.shape[0] != m:
            raise DomainError("times, covariates and responses must share their length")
        if m < 2:
            raise DomainError("a path needs at least two observations")

    @property
    def q(self) -> int:
        return self.covariates.shape[1]

    def increments(self, count: int | None = None):
        """``(dY, dX)`` for the first ``count`` steps (all steps by default)."""
        stop = None if count is None else count + 1
        y = self.responses[:stop]
        x = self.covariates[:stop]
        if count is not None and y.size < count + 1:
            raise DomainError(f"path has {self.responses.size - 1} increments, {count} requested")
        return np.diff(y), np.diff(x, axis=0)
