"""Law of the rescaled Student-Levy increment ``J_h / h``.

The unit-time law of the driving process is the Student-t distribution with
density ``Gamma((nu+1)/2) / (sqrt(pi) Gamma(nu/2)) * (1 + x**2)**(-(nu+1)/2)``
(note: no ``x**2/nu`` rescaling).  Its characteristic function is

    phi(u) = 2**(1 - nu/2) / Gamma(nu/2) * |u|**(nu/2) * K_{nu/2}(|u|),

and the increment over a step of length ``h`` has characteristic function
``phi(u)**h``.  The rescaled increment ``J_h / h`` therefore has
characteristic function ``phi(u/h)**h``, which tends to ``exp(-|u|)`` as
``h -> 0``: small-time increments look Cauchy whatever ``nu`` is.

:func:`build_density_table` inverts ``phi(u/h)**h`` on a uniform symmetric
grid, builds the CDF by a symmetrised left-Riemann sum and exposes inverse-CDF
sampling on top of it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import fft, integrate, optimize, special

from .errors import DomainError, MassError, TruncationError
from .specfun import log_bessel_k_scaled, log_gamma

__all__ = [
    "GridSpec",
    "DensityTable",
    "cf_unit",
    "log_cf_unit",
    "log_cf_rescaled",
    "build_density_table",
    "default_grid",
    "cdf_eval",
    "quantile",
    "sample_increments",
    "l1_distance_to_cauchy",
    "cauchy_pdf",
    "student_pdf",
]

CF_TAIL_LEVEL = 1e-14
# DCT period is kept at least this many grid half-widths, so the aliased
# images of the density sit far out in its tail.
ALIAS_FACTOR = 4.0


def _check_nu(nu):
    if not (math.isfinite(nu) and nu > 0.0):
        raise DomainError(f"nu must be a positive finite number, got {nu!r}")


def _check_h(h):
    if not (math.isfinite(h) and 0.0 < h <= 1.0):
        raise DomainError(f"h must lie in (0, 1], got {h!r}")


def student_pdf(x, nu, mu=0.0, sigma=1.0):
    """Density of the scaled Student-t law ``t_nu(mu, sigma)``."""
    z = (np.asarray(x, dtype=float) - mu) / sigma
    logc = log_gamma((nu + 1.0) / 2.0) - log_gamma(nu / 2.0) - 0.5 * math.log(math.pi)
    return np.exp(logc - 0.5 * (nu + 1.0) * np.log1p(z * z)) / sigma


def cauchy_pdf(x):
    """Standard Cauchy density ``1 / (pi (1 + x**2))``."""
    x = np.asarray(x, dtype=float)
    return 1.0 / (math.pi * (1.0 + x * x))


def log_cf_unit(u, nu):
    """``log phi(u)`` for the unit-time Student-t law; 0 at the origin."""
    _check_nu(nu)
    u = np.abs(np.asarray(u, dtype=float))
    if not np.all(np.isfinite(u)):
        raise DomainError("u must be finite")
    r = 0.5 * nu
    out = np.zeros(u.shape)
    pos = u > 0.0
    if np.any(pos):
        v = u[pos]
        out[pos] = (
            (1.0 - r) * math.log(2.0)
            - log_gamma(r)
            + r * np.log(v)
            + log_bessel_k_scaled(r, v)
            - v
        )
    # phi <= 1; rounding can push the log a hair above 0 near the origin
    np.minimum(out, 0.0, out=out)
    return float(out) if out.ndim == 0 else out


def cf_unit(u, nu):
    """Characteristic function of the unit-time Student-t law."""
    return np.exp(log_cf_unit(u, nu))


def log_cf_rescaled(u, nu, h):
    """``h * log phi(u / h)``: log characteristic function of ``J_h / h``."""
    _check_h(h)
    return h * log_cf_unit(np.asarray(u, dtype=float) / h, nu)


def _tail_amplitude(nu, h):
    # f_h(x) ~ A h**(1-nu) |x|**(-1-nu) as |x| -> oo
    return math.exp(log_gamma((nu + 1.0) / 2.0) - log_gamma(nu / 2.0)) / math.sqrt(math.pi) * h ** (1.0 - nu)


def _truncation_bound(nu, h, level=CF_TAIL_LEVEL):
    target = math.log(level)
    f = lambda u: float(log_cf_rescaled(u, nu, h)) - target
    hi = 1.0
    while f(hi) > 0.0:
        hi *= 2.0
        if hi > 1e6:
            raise TruncationError("characteristic function does not decay")
    return optimize.brentq(f, hi / 2.0 if hi > 1.0 else 0.0, hi, xtol=1e-6) * 1.001


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on ``[-x_max, x_max]`` plus frequency-side settings.

    ``u_max`` truncates the characteristic-function integral; ``None`` picks
    the point where ``|phi(u/h)**h|`` drops to 1e-14.  ``u_points`` is the
    minimum number of quadrature nodes on ``[0, u_max]``.
    """

    x_max: float = 50.0
    points: int = 8192
    u_max: float | None = None
    u_points: int = 2**14

    def __post_init__(self):
        if not (math.isfinite(self.x_max) and self.x_max > 0.0):
            raise DomainError("x_max must be positive")
        if int(self.points) != self.points or self.points < 64:
            raise DomainError("points must be an integer >= 64")
        if self.u_max is not None and not (math.isfinite(self.u_max) and self.u_max > 0.0):
            raise DomainError("u_max must be positive")
        if int(self.u_points) != self.u_points or self.u_points < 256:
            raise DomainError("u_points must be an integer >= 256")

    @property
    def x_min(self) -> float:
        return -self.x_max

    @property
    def dx(self) -> float:
        return 2.0 * self.x_max / (self.points - 1)

    def abscissae(self) -> np.ndarray:
        return np.linspace(-self.x_max, self.x_max, int(self.points))


def default_grid(nu: float, h: float, dx: float = 0.025) -> GridSpec:
    """Grid wide enough for simulation: reaches ``|x| = 50/h``.

    Past roughly ``1/h`` the rescaled increment leaves its Cauchy-like core
    and follows the ``|x|**(-1-nu)`` power tail, which is what the Pareto
    splice in :func:`sample_increments` assumes beyond the grid.
    """
    _check_nu(nu)
    _check_h(h)
    x_max = 50.0 / h
    half = int(math.ceil(x_max / dx))
    return GridSpec(x_max=half * dx, points=2 * half + 1)


@dataclass(frozen=True, eq=False)
class DensityTable:
    """Gridded pdf and cdf of ``J_h / h``; immutable once built.

    ``tail_mass`` is the two-sided probability beyond ``+-x_max`` computed by
    an independent adaptive quadrature; ``mass`` is the left-Riemann mass on
    the grid.  Together they account for the whole law.
    """

    nu: float
    h: float
    grid: GridSpec
    x: np.ndarray = field(repr=False)
    pdf: np.ndarray = field(repr=False)
    cdf: np.ndarray = field(repr=False)
    mass: float = 1.0
    tail_mass: float = 0.0
    clipped_mass: float = 0.0
    u_max: float = 0.0

    @property
    def dx(self) -> float:
        return self.grid.dx


def _tail_probability(nu, h, x_max, u_max):
    """P(|J_h/h| > x_max) = (2/pi) int_0^oo sin(u x) (1 - phi_h(u)) / u du."""

    def g(u):
        return -math.expm1(float(log_cf_rescaled(u, nu, h))) / u

    # Near u = 0 the computed 1 - phi_h is rounding noise, and dividing by u
    # sends the adaptive rule chasing it toward the origin.  On [0, a0] the
    # integrand is below x_max * (1 - phi_h(a0)), so that piece is dropped.
    a0 = min(1e-3 * h, 1e-6 / x_max)
    # (1 - phi_h)/u changes shape on the scale u ~ h; QAWO misses that
    # structure at large x_max unless the range is split there.
    cuts = [a0] + sorted(c for c in (10.0 * h, 100.0 * h, 1.0) if a0 < c < u_max) + [u_max]
    head = 0.0
    # the tail is a small difference of O(1) terms, hence the tight tolerances
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(cuts[:-1], cuts[1:]):
            head += integrate.quad(g, a, b, weight="sin", wvar=x_max, limit=500,
                                   epsabs=1e-14, epsrel=1e-12)[0]
    si, _ = special.sici(u_max * x_max)
    return 2.0 / math.pi * (head + math.pi / 2.0 - si)


def _half_line_density(nu, h, grid, u_max):
    """pdf at the non-negative grid nodes via one DCT-I of the CF samples."""
    dx = grid.dx
    even = int(grid.points) % 2 == 0
    # DCT node spacing: a divisor of dx (half of it when 0 is not a grid node)
    # fine enough that the frequency range pi/delta covers u_max.
    step = 2 if even else 1
    m = step
    while math.pi * m / dx < u_max:
        m += step
    delta = dx / m
    span = max(ALIAS_FACTOR * grid.x_max, math.pi * grid.u_points / u_max)
    length = fft.next_fast_len(int(math.ceil(span / delta)) + 1, real=True)
    du = math.pi / ((length - 1) * delta)

    n_live = min(int(u_max / du) + 1, length - 1)
    u = np.arange(n_live) * du
    samples = np.zeros(length)
    samples[:n_live] = np.exp(log_cf_rescaled(u, nu, h))
    # trapezoid sum  du * [F0/2 + sum_k F_k cos(u_k x_j)]  ==  du/2 * DCT-I
    y = fft.dct(samples, type=1)
    n_half = (int(grid.points) + 1) // 2
    idx = (np.arange(n_half) * 2 + 1) * (m // 2) if even else np.arange(n_half) * m
    xs = idx * delta
    pdf = y[idx] * (0.5 * du / math.pi)

    period = 2.0 * math.pi / du
    if period - grid.x_max >= 1.0 / h:
        # The trapezoid sum equals the density summed over its images at
        # x + k*period (Poisson summation); remove them using the power tail.
        s = 1.0 + nu
        amp = _tail_amplitude(nu, h) * period ** (-s)
        pdf -= amp * (special.zeta(s, 1.0 + xs / period) + special.zeta(s, 1.0 - xs / period))
    return xs, pdf


def build_density_table(
    nu: float,
    h: float,
    grid: GridSpec | None = None,
    mass_tolerance: float = 1e-4,
    max_clipped: float = 1e-6,
) -> DensityTable:
    """Tabulate the density and cdf of ``J_h / h`` by Fourier inversion.

    Raises :class:`TruncationError` when the characteristic function is not
    below 1e-14 at ``grid.u_max`` and :class:`MassError` when the grid mass
    plus the independently computed tail mass misses 1 by more than
    ``mass_tolerance`` or when clipping negative ringing removes more than
    ``max_clipped``.
    """
    _check_nu(nu)
    _check_h(h)
    if grid is None:
        grid = default_grid(nu, h)
    if grid.u_max is None:
        u_max = _truncation_bound(nu, h)
    else:
        u_max = float(grid.u_max)
        if math.exp(float(log_cf_rescaled(u_max, nu, h))) > CF_TAIL_LEVEL:
            raise TruncationError(
                f"|cf| at u_max={u_max} exceeds {CF_TAIL_LEVEL}; raise u_max"
            )

    _, half = _half_line_density(nu, h, grid, u_max)
    dx = grid.dx
    n = int(grid.points)
    pdf = np.empty(n)
    n_half = half.size
    pdf[n - n_half:] = half
    pdf[: n - n_half] = half[::-1][: n - n_half] if n % 2 == 0 else half[:0:-1]

    negative = pdf < 0.0
    clipped = float(-pdf[negative].sum() * dx)
    if clipped > max_clipped:
        raise MassError(f"clipped negative mass {clipped:.3g} exceeds {max_clipped:g}")
    pdf[negative] = 0.0

    left = np.concatenate(([0.0], np.cumsum(pdf[:-1]))) * dx
    mass = float(left[-1] + pdf[-1] * dx)
    tail = _tail_probability(nu, h, grid.x_max, u_max)
    if abs(mass + tail - 1.0) > mass_tolerance:
        raise MassError(
            f"grid mass {mass:.8f} + tail mass {tail:.8f} deviates from 1 "
            f"by more than {mass_tolerance:g}"
        )
    # Left-Riemann sums from both ends, combined through the symmetry
    # f(x) = f(-x); this pins cdf(0) = 1/2 and cancels the O(dx) lag of a
    # one-sided sum.
    cdf = 0.5 + 0.5 * (left - left[::-1])
    np.clip(cdf, 0.0, 1.0, out=cdf)

    x = grid.abscissae()
    for arr in (x, pdf, cdf):
        arr.setflags(write=False)
    return DensityTable(
        nu=float(nu),
        h=float(h),
        grid=grid,
        x=x,
        pdf=pdf,
        cdf=cdf,
        mass=mass,
        tail_mass=float(tail),
        clipped_mass=clipped,
        u_max=u_max,
    )


def cdf_eval(table: DensityTable, x):
    """Piecewise-linear cdf; 0 below the grid and 1 above it."""
    return np.interp(x, table.x, table.cdf, left=0.0, right=1.0)


def _invert(table, p):
    cdf = table.cdf
    i = np.searchsorted(cdf, p, side="right") - 1
    i = np.clip(i, 0, cdf.size - 2)
    lo, hi = cdf[i], cdf[i + 1]
    w = np.where(hi > lo, (p - lo) / np.where(hi > lo, hi - lo, 1.0), 0.0)
    return table.x[i] + np.clip(w, 0.0, 1.0) * table.dx


def quantile(table: DensityTable, p):
    """Inverse of :func:`cdf_eval`, clamped to the grid ends."""
    p_arr = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(p_arr)) or np.any(p_arr <= 0.0) or np.any(p_arr >= 1.0):
        raise DomainError("p must lie in the open interval (0, 1)")
    out = np.clip(_invert(table, p_arr), table.x[0], table.x[-1])
    out = np.where(p_arr <= table.cdf[0], table.x[0], out)
    out = np.where(p_arr >= table.cdf[-1], table.x[-1], out)
    return float(out) if out.ndim == 0 else out


def _quantile_with_tails(table, p):
    x = _invert(table, p)
    lo, hi = table.cdf[0], table.cdf[-1]
    x_max = table.grid.x_max
    upper = p > hi
    lower = p < lo
    if np.any(upper):
        x[upper] = x_max * ((1.0 - p[upper]) / (1.0 - hi)) ** (-1.0 / table.nu)
    if np.any(lower):
        x[lower] = -x_max * (p[lower] / lo) ** (-1.0 / table.nu)
    return x


def sample_increments(table: DensityTable, count: int, seed, tails: str = "pareto") -> np.ndarray:
    """Draw ``count`` variates of ``J_h / h`` by inversion of the tabulated cdf.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts.  With
    ``tails="pareto"`` the probability left beyond the grid is redistributed
    along a Pareto tail of index ``nu`` (the exact tail order of the law);
    ``tails="clamp"`` pins those draws to the grid ends instead.
    """
    if count < 1:
        raise DomainError("count must be >= 1")
    rng = np.random.default_rng(seed)
    # shift off zero so every uniform lies strictly inside (0, 1)
    p = rng.random(int(count)) + 2.0**-54
    if tails == "pareto":
        return _quantile_with_tails(table, p)
    if tails == "clamp":
        return np.clip(_invert(table, p), table.x[0], table.x[-1])
    raise DomainError(f"unknown tails mode {tails!r}")


def l1_distance_to_cauchy(table: DensityTable) -> float:
    """Riemann approximation of ``int |f_h - phi_1|`` over the grid."""
    return float(np.abs(table.pdf - cauchy_pdf(table.x)).sum() * table.dx)
