"""Two-stage quasi-likelihood estimation for Student-t Lévy driven models.

Stage one fits the trend and scale from high-frequency increments with a
Cauchy quasi-likelihood; stage two fits the degrees of freedom from unit-time
residuals with the Student-t likelihood.
"""

from .cqmle import CqmleFit, cauchy_loglik, cauchy_score_hessian, fit_cqmle
from .errors import (
    ConfigError,
    DomainError,
    IdentifiabilityError,
    MassError,
    NonConvergence,
    StudentLevyError,
    TruncationError,
)
from .inference import (
    FitResult,
    confidence_intervals,
    covariate_gram,
    fisher_nu,
    fit_two_stage,
    studentize,
)
from .levy import (
    DensityTable,
    GridSpec,
    build_density_table,
    default_grid,
    l1_distance_to_cauchy,
    sample_increments,
)
from .model import PathSample, SamplingDesign, Theta
from .montecarlo import McConfig, McSummary, ks_statistic, run_mc
from .simulate import RegressorSpec, simulate_regression_path, simulate_sde_path
from .tqmle import TqmleFit, fit_tqmle, student_loglik, unit_residuals

__version__ = "0.1.0"
