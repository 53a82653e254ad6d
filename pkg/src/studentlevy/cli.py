"""Command-line entry point: ``studentlevy {density,simulate,fit,mc}``.

Every setting can come from a flat ``key = value`` file given with
``--config`` or from a ``--key value`` flag; flags win.  Failures print a
one-line JSON error record on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings

import numpy as np

from .config import KEYS, parse_config
from .errors import ConfigError, StudentLevyError

EXIT_CONFIG = 2
EXIT_RUNTIME = 1


def _num(x) -> str:
    return repr(float(x))


def _ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def cmd_density(cfg) -> dict:
    from .levy import GridSpec, build_density_table, default_grid

    nu, h, dx = cfg["nu"], cfg["h"], cfg["dx"]
    if cfg["x_max"] is None:
        grid = default_grid(nu, h, dx)
    else:
        half = int(math.ceil(cfg["x_max"] / dx))
        grid = GridSpec(x_max=half * dx, points=2 * half + 1)
    table = build_density_table(nu, h, grid)
    keep = np.abs(table.x) <= cfg["window"] + 1e-12
    out = cfg["out"]
    _ensure_parent(out)
    with open(out, "w", newline="") as fh:
        fh.write(f"# nu = {_num(nu)}\n# h = {_num(h)}\n# dx = {_num(grid.dx)}\n# x_max = {_num(grid.x_max)}\n")
        fh.write(f"# grid_mass = {_num(table.mass)}\n# tail_mass = {_num(table.tail_mass)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "pdf", "cdf"])
        for x, p, c in zip(table.x[keep], table.pdf[keep], table.cdf[keep]):
            w.writerow([_num(x), _num(p), _num(c)])
    written = [out]
    if cfg["figure"]:
        from .plotting import write_density_figure

        written.append(write_density_figure(table.x[keep], table.pdf[keep], nu, h,
                                            os.path.splitext(out)[0] + ".png"))
    return {"written": written, "grid_mass": table.mass, "tail_mass": table.tail_mass}


def _theta_design(cfg):
    from .model import SamplingDesign, Theta

    return Theta(tuple(cfg["mu"]), cfg["sigma"], cfg["nu"]), SamplingDesign(cfg["n"], cfg["T"], cfg["B"])


def _regressors(cfg):
    from .simulate import OUParams, RegressorSpec

    ou = None
    if cfg["regressors"] == "diffusion_ou":
        ou = OUParams(cfg["ou_rate"], cfg["ou_vol"], cfg["ou_start"])
    return RegressorSpec(cfg["regressors"], tuple(cfg["frequencies"]), ou)


def cmd_simulate(cfg) -> dict:
    from .pathio import write_path_csv
    from .simulate import named_drift, simulate_regression_path, simulate_sde_path

    theta, design = _theta_design(cfg)
    if cfg["model"] == "sde":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            path = simulate_sde_path(theta.mu, theta.sigma, theta.nu, named_drift(cfg["drift"]),
                                     design, cfg["seed"])
        extra = {"drift": cfg["drift"]}
    else:
        path = simulate_regression_path(theta, design, _regressors(cfg), cfg["seed"])
        extra = {"frequencies": ",".join(_num(f) for f in cfg["frequencies"])}
    _ensure_parent(cfg["out"])
    write_path_csv(path, cfg["out"], extra)
    return {"written": [cfg["out"]], "rows": int(path.times.size)}


def fit_record(fit, level) -> dict:
    from .inference import confidence_intervals, param_names, standard_errors

    names = param_names(fit.q)
    th = fit.theta_hat
    one, two = fit.stage_one, fit.stage_two
    return {
        "estimates": {"mu": list(th.mu), "sigma": th.sigma, "nu": th.nu},
        "standard_errors": dict(zip(names, standard_errors(fit).tolist())),
        "level": level,
        "ci": {k: list(v) for k, v in confidence_intervals(fit, level).items()},
        "stage_one": {
            "gradient_norm": one.gradient_norm,
            "hessian": one.hessian.tolist(),
            "iterations": one.iterations,
            "converged": one.converged,
            "loglik": one.loglik,
            "flags": list(one.flags),
        },
        "stage_two": {
            "nu_hat": two.nu_hat,
            "mbar": two.mbar,
            "score": two.score,
            "converged": two.converged,
            "boundary_flag": two.boundary_flag,
            "residuals": two.count,
        },
        "S_hat": fit.S_hat.tolist(),
        "gamma_a": fit.gamma_a.tolist(),
        "gamma_nu": fit.gamma_nu,
        "warnings": list(fit.warnings),
    }


def cmd_fit(cfg) -> dict:
    from .inference import fit_two_stage
    from .pathio import read_path_csv

    path = read_path_csv(cfg["input"], B=cfg["B"])
    fit = fit_two_stage(path, nu_bounds=(cfg["nu_min"], cfg["nu_max"]))
    rec = fit_record(fit, cfg["level"])
    d = path.design
    rec["design"] = {"n": d.n, "T": d.T, "B": d.B, "N": d.N}
    text = json.dumps(rec, indent=2, sort_keys=True) + "\n"
    if cfg["out"] == "-":
        sys.stdout.write(text)
        return {"written": []}
    _ensure_parent(cfg["out"])
    with open(cfg["out"], "w") as fh:
        fh.write(text)
    return {"written": [cfg["out"]]}


def cmd_mc(cfg) -> dict:
    from .montecarlo import McConfig, run_mc, write_mc_outputs

    theta, design = _theta_design(cfg)
    mc = McConfig(theta, design, _regressors(cfg), cfg["reps"], cfg["seed"], cfg["workers"],
                  (cfg["nu_min"], cfg["nu_max"]))
    summary = run_mc(mc)
    written = write_mc_outputs(summary, cfg["out"])
    if cfg["figures"] and summary.successes:
        from .plotting import write_histogram_figures

        written += write_histogram_figures(summary, cfg["out"])
    return {"written": written, "successes": summary.successes, "failures": len(summary.failures)}


COMMAND_FUNCS = {"density": cmd_density, "simulate": cmd_simulate, "fit": cmd_fit, "mc": cmd_mc}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="studentlevy", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for command, keys in KEYS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", help="flat 'key = value' file; flags override it")
        for key in keys:
            if key.parse.__name__ == "_bool":
                p.add_argument(f"--{key.name}", action="store_const", const=True, default=None,
                               help=key.help)
            else:
                extra = f" (default {key.default})" if key.default is not None else ""
                p.add_argument(f"--{key.name}", default=None, help=key.help + extra)
    return parser


def _error(kind, module, message, problems=None):
    rec = {"error": kind, "module": module, "message": message}
    if problems:
        rec["problems"] = problems
    sys.stderr.write(json.dumps(rec) + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = parse_config(args.command, args.config, overrides)
    except ConfigError as exc:
        _error("ConfigError", "config", str(exc), exc.problems)
        return EXIT_CONFIG
    try:
        info = COMMAND_FUNCS[args.command](cfg)
    except (StudentLevyError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        module = type(exc).__module__.rsplit(".", 1)[-1]
        tb = exc.__traceback__
        while tb is not None:
            mod = tb.tb_frame.f_globals.get("__name__", "")
            if mod.startswith("studentlevy."):
                module = mod.split(".", 1)[1]
            tb = tb.tb_next
        _error(type(exc).__name__, module, str(exc))
        return EXIT_RUNTIME
    if info.get("written"):
        # fit to stdout already used stdout for the record itself
        sys.stdout.write(json.dumps({"command": args.command, **info}) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
