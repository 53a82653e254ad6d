"""Path CSV files: ``# key = value`` header comments, then ``t, X_1..X_q, Y``."""

from __future__ import annotations

import csv

import numpy as np

from .errors import DomainError
from .model import PathSample, SamplingDesign, Theta

__all__ = ["write_path_csv", "read_path_csv"]


def _num(x) -> str:
    return repr(float(x))


def write_path_csv(path: PathSample, dest, extra: dict | None = None) -> None:
    d = path.design
    meta = {"n": d.n, "T": _num(d.T), "B": _num(d.B)}
    if path.truth is not None:
        meta["mu"] = ",".join(_num(m) for m in path.truth.mu)
        meta["sigma"] = _num(path.truth.sigma)
        meta["nu"] = _num(path.truth.nu)
    meta.update(path.meta)
    meta.update(extra or {})
    with open(dest, "w", newline="") as fh:
        for key, value in meta.items():
            fh.write(f"# {key} = {value}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"X_{k + 1}" for k in range(path.q)] + ["Y"])
        for t, x, y in zip(path.times, path.covariates, path.responses):
            w.writerow([_num(t)] + [_num(v) for v in x] + [_num(y)])


def read_path_csv(src, B: float | None = None) -> PathSample:
    """Inverse of :func:`write_path_csv`; ``B`` overrides the stored window."""
    meta = {}
    rows = []
    header = None
    with open(src, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, sep, value = line[1:].partition("=")
                if sep:
                    meta[key.strip()] = value.strip()
                continue
            if header is None:
                header = next(csv.reader([line]))
                continue
            if line.strip():
                rows.append(line)
    if header is None or header[0] != "t" or header[-1] != "Y" or len(header) < 3:
        raise DomainError(f"{src}: expected a header row 't, X_1..X_q, Y'")
    data = np.array([[float(v) for v in r] for r in csv.reader(rows)]).reshape(-1, len(header))
    try:
        n = int(meta["n"])
        T = float(meta["T"])
        B = float(meta["B"]) if B is None else float(B)
    except KeyError as exc:
        raise DomainError(f"{src}: header comment {exc.args[0]!r} is missing") from None
    design = SamplingDesign(n, T, B)
    if data.shape[0] != design.steps + 1:
        raise DomainError(f"{src}: {data.shape[0]} rows, design needs {design.steps + 1}")
    if not np.allclose(np.diff(data[:, 0]), design.h, rtol=1e-9, atol=1e-12):
        raise DomainError(f"{src}: times are not spaced by 1/n")
    truth = None
    if {"mu", "sigma", "nu"} <= meta.keys():
        truth = Theta(tuple(float(m) for m in meta["mu"].split(",")), float(meta["sigma"]), float(meta["nu"]))
    keep = {k: v for k, v in meta.items() if k not in ("n", "T", "B", "mu", "sigma", "nu")}
    return PathSample(design, data[:, 0], data[:, 1:-1], data[:, -1], truth=truth, meta=keep)
