"""Replicated simulate / fit / studentize experiments.

Replication ``r`` of a run with master seed ``s`` uses the path seed
:func:`replication_seed` ``(s, r)``, so results do not depend on how the
replications are spread over worker processes, and a single replication can
be reproduced with ``simulate`` + ``fit`` given that seed.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DomainError, NonConvergence, StudentLevyError
from .inference import fit_two_stage, log_sigma_statistic, param_names, studentize
from .model import SamplingDesign, Theta
from .simulate import RegressorSpec, cached_table, simulate_regression_path
from .tqmle import DEFAULT_NU_BOUNDS

__all__ = [
    "McConfig",
    "McSummary",
    "replication_seed",
    "run_replication",
    "run_mc",
    "ks_statistic",
    "write_mc_outputs",
    "MAX_FAILURE_RATE",
]

MAX_FAILURE_RATE = 0.2


@dataclass(frozen=True)
class McConfig:
    theta0: Theta
    design: SamplingDesign
    regressors: RegressorSpec = RegressorSpec()
    replications: int = 300
    master_seed: int = 0
    workers: int = 1
    nu_bounds: tuple = DEFAULT_NU_BOUNDS

    def __post_init__(self):
        if int(self.replications) != self.replications or self.replications < 1:
            raise DomainError("replications must be a positive integer")
        if int(self.workers) != self.workers or self.workers < 1:
            raise DomainError("workers must be a positive integer")
        if not 0 <= int(self.master_seed) < 2**64:
            raise DomainError("master_seed must be a 64-bit unsigned integer")
        if self.regressors.q != self.theta0.q:
            raise DomainError("regressors and theta0 disagree on the number of trend parameters")

    @property
    def columns(self) -> list[str]:
        return param_names(self.theta0.q) + ["log_sigma"]


def replication_seed(master_seed: int, r: int) -> int:
    """64-bit path seed for replication ``r``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(r),))
    return int(ss.generate_state(1, np.uint64)[0])


def run_replication(config: McConfig, r: int, table=None):
    """``(seed, statistics or None, failure reason or None)`` for replication ``r``."""
    seed = replication_seed(config.master_seed, r)
    try:
        path = simulate_regression_path(config.theta0, config.design, config.regressors, seed, table)
        fit = fit_two_stage(path, config.design, nu_bounds=config.nu_bounds)
    except (StudentLevyError, np.linalg.LinAlgError) as exc:
        return seed, None, f"{type(exc).__name__}: {exc}"
    if not fit.stage_one.converged:
        return seed, None, "stage one: " + (", ".join(fit.stage_one.flags) or "not converged")
    if fit.stage_two.boundary_flag != "none":
        return seed, None, f"stage two: nu on {fit.stage_two.boundary_flag} bound"
    z = studentize(fit, config.theta0)
    zs = log_sigma_statistic(fit.theta_hat.sigma, config.theta0.sigma, fit.N)
    return seed, np.append(z, zs), None


def ks_statistic(values):
    """Two-sided KS distance to N(0, 1) and its asymptotic p-value."""
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise DomainError("KS statistic needs at least one value")
    res = stats.kstest(x, "norm", method="asymp")
    return float(res.statistic), float(res.pvalue)


@dataclass(eq=False)
class McSummary:
    config: McConfig
    columns: list
    replication: np.ndarray  # indices of successful replications
    seeds: np.ndarray
    values: np.ndarray  # shape (successes, len(columns))
    failures: list = field(default_factory=list)  # (replication, seed, reason)

    @property
    def successes(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def mean(self, name):
        return float(np.mean(self.column(name)))

    def sd(self, name):
        return float(np.std(self.column(name), ddof=1)) if self.successes > 1 else float("nan")

    def ks(self, name):
        return ks_statistic(self.column(name))

    def histogram(self, name):
        """Freedman–Diaconis bin edges and counts."""
        v = self.column(name)
        edges = np.histogram_bin_edges(v, bins="fd")
        counts, _ = np.histogram(v, bins=edges)
        return edges, counts

    def as_dict(self) -> dict:
        cfg = self.config
        per = {}
        for name in self.columns:
            D, p = self.ks(name)
            per[name] = {"mean": self.mean(name), "sd": self.sd(name), "ks_D": D, "ks_p": p}
        return {
            "theta0": {"mu": list(cfg.theta0.mu), "sigma": cfg.theta0.sigma, "nu": cfg.theta0.nu},
            "design": {"n": cfg.design.n, "T": cfg.design.T, "B": cfg.design.B, "N": cfg.design.N},
            "regressors": {"kind": cfg.regressors.kind, "frequencies": list(cfg.regressors.frequencies)},
            "replications": cfg.replications,
            "master_seed": int(cfg.master_seed),
            "successes": self.successes,
            "failures": len(self.failures),
            "failure_log": [
                {"replication": int(r), "seed": int(s), "reason": why} for r, s, why in self.failures
            ],
            "statistics": per,
        }


_WORKER = {}


def _worker_init(config, table):
    _WORKER["config"] = config
    _WORKER["table"] = table


def _worker_run(r):
    return run_replication(_WORKER["config"], r, _WORKER["table"])


def run_mc(config: McConfig, table=None) -> McSummary:
    """Run every replication and collect studentized statistics.

    Failed replications (stage-one non-convergence, ``nu`` on a bound, or a
    numerical error) are recorded and left out of the statistics; more than
    ``MAX_FAILURE_RATE`` of them aborts the run.
    """
    if table is None:
        table = cached_table(float(config.theta0.nu), config.design.h)
    reps = range(config.replications)
    if config.workers == 1:
        results = [run_replication(config, r, table) for r in reps]
    else:
        chunk = max(1, config.replications // (4 * config.workers))
        with ProcessPoolExecutor(
            max_workers=config.workers, initializer=_worker_init, initargs=(config, table)
        ) as pool:
            results = list(pool.map(_worker_run, reps, chunksize=chunk))

    ok_r, ok_seed, rows, failed = [], [], [], []
    for r, (seed, z, why) in enumerate(results):
        if z is None:
            failed.append((r, seed, why))
        else:
            ok_r.append(r)
            ok_seed.append(seed)
            rows.append(z)
    if len(failed) > MAX_FAILURE_RATE * config.replications:
        raise NonConvergence(
            f"{len(failed)} of {config.replications} replications failed; first: {failed[0][2]}"
        )
    ncol = len(config.columns)
    return McSummary(
        config=config,
        columns=config.columns,
        replication=np.array(ok_r, dtype=int),
        seeds=np.array(ok_seed, dtype=np.uint64),
        values=np.array(rows, dtype=float).reshape(-1, ncol),
        failures=failed,
    )


def _fmt(x) -> str:
    return repr(float(x))


def write_mc_outputs(summary: McSummary, outdir) -> list[str]:
    """Write ``summary.json``, ``studentized.csv`` and ``hist_<param>.csv``."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    p = os.path.join(outdir, "summary.json")
    with open(p, "w") as fh:
        json.dump(summary.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(p)

    p = os.path.join(outdir, "studentized.csv")
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replication", "seed"] + summary.columns)
        for r, s, row in zip(summary.replication, summary.seeds, summary.values):
            w.writerow([int(r), int(s)] + [_fmt(v) for v in row])
    written.append(p)

    if summary.successes:
        for name in summary.columns:
            edges, counts = summary.histogram(name)
            p = os.path.join(outdir, f"hist_{name}.csv")
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["bin_left", "bin_right", "count"])
                for a, b, c in zip(edges[:-1], edges[1:], counts):
                    w.writerow([_fmt(a), _fmt(b), int(c)])
            written.append(p)
    return written

