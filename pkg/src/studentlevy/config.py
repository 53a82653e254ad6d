"""Flat ``key = value`` run configuration with exhaustive validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError

__all__ = ["Key", "KEYS", "RunConfig", "parse_config", "read_config_file", "COMMANDS"]


def _float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("not a finite number")
    return v


def _int(s):
    if isinstance(s, int):
        return s
    try:
        return int(str(s).strip())
    except ValueError:
        f = float(s)
        if not f.is_integer():
            raise ValueError("not an integer") from None
        return int(f)


def _floats(s):
    if isinstance(s, (list, tuple)):
        return [_float(x) for x in s]
    parts = [p for p in str(s).replace(",", " ").split() if p]
    if not parts:
        raise ValueError("empty list")
    return [_float(p) for p in parts]


def _bool(s):
    if isinstance(s, bool):
        return s
    low = str(s).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true or false")


def _str(s):
    return str(s).strip()


@dataclass(frozen=True)
class Key:
    name: str
    parse: object
    default: object = None
    required: bool = False
    help: str = ""
    choices: tuple = ()


_THETA = [
    Key("mu", _floats, required=True, help="trend coefficients, comma separated"),
    Key("sigma", _float, required=True, help="scale, > 0"),
    Key("nu", _float, required=True, help="degrees of freedom, > 0"),
]
_DESIGN = [
    Key("n", _int, required=True, help="observations per unit time (h = 1/n)"),
    Key("T", _float, required=True, help="observation horizon"),
    Key("B", _float, help="stage-one window, 0 < B <= T (default T/10)"),
]
_REGRESSORS = [
    Key("regressors", _str, "periodic_pair", help="covariate recipe",
        choices=("periodic_pair", "custom_periodic", "diffusion_ou")),
    Key("frequencies", _floats, [5.0, 1.0], help="periodic frequencies"),
    Key("ou_rate", _float, 1.0, help="OU mean-reversion rate (diffusion_ou)"),
    Key("ou_vol", _float, 1.0, help="OU volatility (diffusion_ou)"),
    Key("ou_start", _float, 0.0, help="OU start value (diffusion_ou)"),
]
_NU_BOUNDS = [
    Key("nu_min", _float, 0.05, help="lower bound for the nu estimate"),
    Key("nu_max", _float, 100.0, help="upper bound for the nu estimate"),
]

KEYS = {
    "density": [
        Key("nu", _float, required=True, help="degrees of freedom, > 0"),
        Key("h", _float, required=True, help="step size in (0, 1]"),
        Key("dx", _float, 0.025, help="grid spacing"),
        Key("x_max", _float, help="grid half-width (default 50/h)"),
        Key("window", _float, 50.0, help="only rows with |x| <= window are written"),
        Key("out", _str, "density.csv", help="output CSV"),
        Key("figure", _bool, False, help="also write a PNG plot next to the CSV"),
    ],
    "simulate": [
        Key("model", _str, "regression", help="path model", choices=("regression", "sde")),
        *_THETA,
        *_DESIGN,
        *_REGRESSORS,
        Key("drift", _str, "neg_tanh", help="drift for the sde model",
            choices=("neg_tanh", "neg_atan", "zero")),
        Key("seed", _int, 0, help="64-bit seed"),
        Key("out", _str, "path.csv", help="output CSV"),
    ],
    "fit": [
        Key("input", _str, required=True, help="path CSV written by simulate"),
        Key("B", _float, help="override the stage-one window stored in the file"),
        *_NU_BOUNDS,
        Key("level", _float, 0.95, help="confidence level for the Wald intervals"),
        Key("out", _str, "-", help="output JSON ('-' for stdout)"),
    ],
    "mc": [
        *_THETA,
        *_DESIGN,
        *_REGRESSORS,
        *_NU_BOUNDS,
        Key("reps", _int, 300, help="number of replications"),
        Key("seed", _int, 0, help="64-bit master seed"),
        Key("workers", _int, 1, help="worker processes"),
        Key("out", _str, "mc_out", help="output directory"),
        Key("figures", _bool, False, help="also write histogram PNGs"),
    ],
}
COMMANDS = tuple(KEYS)


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)


def read_config_file(path) -> tuple[dict, list]:
    """Raw ``key -> (value, line number)`` pairs and any syntax problems."""
    raw, problems = {}, []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                problems.append(f"{path}:{lineno}: expected 'key = value', got {text!r}")
                continue
            key, value = (s.strip() for s in text.split("=", 1))
            if not key:
                problems.append(f"{path}:{lineno}: missing key")
            elif key in raw:
                problems.append(f"{path}:{lineno}: key {key!r} repeated (first on line {raw[key][1]})")
            else:
                raw[key] = (value, lineno)
    return raw, problems


def _domain(command, v, problems):
    def need(cond, key, msg):
        if key in v and v[key] is not None and not cond(v[key]):
            problems.append(f"{key}: {msg} (got {v[key]!r})")

    need(lambda x: x > 0, "sigma", "must be > 0")
    need(lambda x: x > 0, "nu", "must be > 0")
    need(lambda x: 0 < x <= 1, "h", "must lie in (0, 1]")
    need(lambda x: x > 0, "dx", "must be > 0")
    need(lambda x: x > 0, "x_max", "must be > 0")
    need(lambda x: x > 0, "window", "must be > 0")
    need(lambda x: x >= 1, "n", "must be a positive integer")
    need(lambda x: x > 0, "T", "must be > 0")
    need(lambda x: x > 0, "B", "must be > 0")
    need(lambda x: x >= 1, "reps", "must be >= 1")
    need(lambda x: x >= 1, "workers", "must be >= 1")
    need(lambda x: 0 <= x < 2**64, "seed", "must be a 64-bit unsigned integer")
    need(lambda x: 0 < x < 1, "level", "must lie in (0, 1)")
    need(lambda x: x > 0, "nu_min", "must be > 0")
    need(lambda x: x > 0, "ou_rate", "must be > 0")
    need(lambda x: x >= 0, "ou_vol", "must be >= 0")
    need(lambda xs: all(f > 0 for f in xs), "frequencies", "must all be > 0")
    if v.get("nu_min") is not None and v.get("nu_max") is not None and not v["nu_min"] < v["nu_max"]:
        problems.append(f"nu_max: must exceed nu_min (got {v['nu_min']!r} and {v['nu_max']!r})")
    T, B = v.get("T"), v.get("B")
    if T is not None and T > 0:
        if B is None and command in ("simulate", "mc"):
            v["B"] = B = T / 10.0
        if B is not None and B > T:
            problems.append(f"B: thinning window B = {B!r} exceeds horizon T = {T!r}; need B <= T")
    if command in ("simulate", "mc") and v.get("mu") is not None and v.get("frequencies") is not None:
        kind, freqs = v.get("regressors"), v["frequencies"]
        if v.get("model") == "sde":
            q = 1  # the named drifts are scalar
        elif kind == "custom_periodic":
            q = 2 * len(freqs)
        else:
            if len(freqs) != 2:
                problems.append(f"frequencies: {kind} needs exactly two (got {len(freqs)})")
            q = 3 if kind == "diffusion_ou" else 2
        if len(v["mu"]) != q:
            problems.append(f"mu: expected {q} coefficients for this model/regressors, got {len(v['mu'])}")


def parse_config(command: str, path=None, overrides: dict | None = None) -> RunConfig:
    """Merge defaults, an optional config file and flag overrides, then validate.

    Every problem found is collected; if there are any a single
    :class:`ConfigError` listing all of them is raised.
    """
    if command not in KEYS:
        raise ConfigError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    spec = {k.name: k for k in KEYS[command]}
    problems = []
    raw = {}
    where = {}
    if path is not None:
        try:
            file_raw, file_problems = read_config_file(path)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
        problems += file_problems
        for key, (value, lineno) in file_raw.items():
            if key not in spec:
                problems.append(f"{path}:{lineno}: unknown key {key!r} for '{command}'")
            else:
                raw[key] = value
                where[key] = f"{path}:{lineno}: "
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in spec:
            problems.append(f"unknown key {key!r} for '{command}'")
        else:
            raw[key] = value
            where[key] = ""

    values = {}
    for name, key in spec.items():
        if name in raw:
            try:
                values[name] = key.parse(raw[name])
            except (TypeError, ValueError) as exc:
                problems.append(f"{where[name]}{name}: cannot parse {raw[name]!r} ({exc})")
                values[name] = None
                continue
            if key.choices and values[name] not in key.choices:
                problems.append(f"{name}: must be one of {', '.join(key.choices)} (got {values[name]!r})")
        elif key.required:
            problems.append(f"{name}: required for '{command}'")
            values[name] = None
        else:
            values[name] = key.default
    _domain(command, values, problems)
    if problems:
        raise ConfigError(problems)
    return RunConfig(command, values)
