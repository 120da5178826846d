"""Experiment configuration: value parsers, INI files and model construction.

Every setting is kept as its canonical text form so an emitted configuration
re-parses to exactly the same values (``1/30`` stays a fraction until it is
turned into a float at the point of use).
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .cost_model import (
    CostModel,
    Deterministic,
    Exponential,
    Gamma,
    IntervalDistribution,
    Polynomial,
    Saturating,
    SqrtSaturating,
    Uniform,
    example_model,
    get_preset,
    sized_model,
)
from .errors import DomainError

OUTPUT_DIR_ENV = "DDSCHED_OUTPUT_DIR"

MODEL_KEYS = ("model", "n", "lambda", "size", "rate", "coeffs", "relative", "c", "preset", "detection_cost")

DEFAULTS: dict[str, str] = {
    "model": "example",
    "n": "100",
    "lambda": "1",
    "size": "sqrt",
    "rate": "1",
    "coeffs": "1",
    "relative": "false",
    "c": "1",
    "preset": "worst-case",
    "detection_cost": "",
    "t_max": "1e6",
    "rel_tol": "1e-9",
    "grid": "1e-3:1e2:200",
    "family": "",
    "layout": "long",
    "lambda_only": "",
    "t": "",
    "policy": "fixed",
    "dists": "deterministic,exponential,uniform,gamma:2",
    "cycles": "100000",
    "seed": "0",
    "workers": "1",
    "n_values": "1e4,1e5,1e6,1e7,1e8",
    "c1": "1",
    "check": "false",
}

# Keys each command reads besides the model keys.
COMMAND_KEYS: dict[str, tuple[str, ...]] = {
    "cost": ("grid", "family", "layout"),
    "optimize": ("t_max", "rel_tol"),
    "table": ("t_max", "rel_tol", "lambda_only", "check"),
    "simulate": ("t_max", "rel_tol", "t", "policy", "cycles", "seed", "workers"),
    "compare": ("t_max", "rel_tol", "t", "dists", "cycles", "seed", "workers"),
    "asymptotic": ("t_max", "rel_tol", "n_values", "c1", "check"),
}


def parse_number(text: str) -> float:
    """Parse decimals, scientific notation or rationals such as ``1/30``."""
    try:
        return float(Fraction(str(text).strip()))
    except (ValueError, ZeroDivisionError):
        raise DomainError(f"not a number: {text!r}") from None


def parse_list(text: str) -> list[float]:
    return [parse_number(p) for p in str(text).split(",") if p.strip()]


def parse_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off", ""):
        return False
    raise DomainError(f"not a boolean: {text!r}")


def parse_int(text: str) -> int:
    value = parse_number(text)
    if value != int(value):
        raise DomainError(f"not an integer: {text!r}")
    return int(value)


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:points`` (log-spaced) or ``lo:hi:points:lin``."""
    parts = str(text).split(":")
    if len(parts) not in (3, 4):
        raise DomainError(f"grid must look like lo:hi:points[:log|lin], got {text!r}")
    lo, hi = parse_number(parts[0]), parse_number(parts[1])
    points = parse_int(parts[2])
    spacing = parts[3].strip().lower() if len(parts) == 4 else "log"
    if spacing not in ("log", "lin"):
        raise DomainError(f"grid spacing must be log or lin, got {spacing!r}")
    if not (0 < lo < hi) or points < 2:
        raise DomainError(f"grid needs 0 < lo < hi and at least 2 points, got {text!r}")
    if spacing == "log":
        return np.geomspace(lo, hi, points)
    return np.linspace(lo, hi, points)


def parse_family(text: str) -> tuple[str, list[str]]:
    """``n=50,100`` or ``lambda=1,1/30`` -> (key, raw values)."""
    key, sep, values = str(text).partition("=")
    key = key.strip()
    if not sep or key not in ("n", "lambda"):
        raise DomainError(f"family must look like n=... or lambda=..., got {text!r}")
    raw = [v.strip() for v in values.split(",") if v.strip()]
    if not raw:
        raise DomainError(f"family {text!r} lists no values")
    for v in raw:
        parse_number(v)
    return key, raw


def parse_dist(text: str, mean: float) -> IntervalDistribution:
    """Distribution with the given mean from ``name[:param]``.

    ``deterministic``, ``exponential``, ``uniform[:w]`` (on mean*(1-w) to
    mean*(1+w), default w=1) and ``gamma[:shape]`` (default shape 2).
    """
    name, _, arg = str(text).strip().lower().partition(":")
    if name == "deterministic":
        return Deterministic(mean)
    if name == "exponential":
        return Exponential(mean)
    if name == "uniform":
        w = parse_number(arg) if arg else 1.0
        if not 0 < w <= 1:
            raise DomainError(f"uniform half-width fraction must be in (0, 1], got {w!r}")
        return Uniform(mean * (1.0 - w), mean * (1.0 + w))
    if name == "gamma":
        k = parse_number(arg) if arg else 2.0
        return Gamma(k, mean / k)
    raise DomainError(f"unknown distribution {text!r}")


@dataclass
class ExperimentConfig:
    """Resolved settings of one command invocation (canonical text values)."""

    command: str
    values: dict[str, str]

    def __getitem__(self, key: str) -> str:
        return self.values[key]

    def number(self, key: str) -> float:
        return parse_number(self.values[key])

    def integer(self, key: str) -> int:
        return parse_int(self.values[key])

    def flag(self, key: str) -> bool:
        return parse_bool(self.values[key])

    def relevant(self) -> dict[str, str]:
        keys = MODEL_KEYS + COMMAND_KEYS[self.command]
        return {k: self.values[k] for k in keys}

    def digest(self) -> str:
        blob = json.dumps({"command": self.command, **self.relevant()}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_ini(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        rel = self.relevant()
        parser["model"] = {k: rel[k] for k in MODEL_KEYS}
        parser[self.command] = {k: rel[k] for k in COMMAND_KEYS[self.command]}
        lines = []
        for section in parser.sections():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {v}" for k, v in parser[section].items())
            lines.append("")
        return "\n".join(lines)

    def model(self, n: float | None = None, lam: float | None = None) -> CostModel:
        """Build the cost model, optionally overriding ``n`` or ``lambda``."""
        n = self.number("n") if n is None else n
        lam = self.number("lambda") if lam is None else lam
        kind = self.values["model"]
        override = self.values["detection_cost"]
        if kind == "example":
            model = example_model(n, lam)
            if override:
                model = CostModel(parse_number(override), lam, model.resolution, n)
            return model
        if kind != "sized":
            raise DomainError(f"model must be 'example' or 'sized', got {kind!r}")
        size_name = self.values["size"]
        rate = self.number("rate")
        if size_name == "saturating":
            size = Saturating(n, rate)
        elif size_name == "sqrt":
            size = SqrtSaturating(n, rate)
        elif size_name == "polynomial":
            size = Polynomial(n, tuple(parse_list(self.values["coeffs"])), relative=self.flag("relative"))
        else:
            raise DomainError(f"size must be saturating, sqrt or polynomial, got {size_name!r}")
        return sized_model(
            size,
            lam,
            preset=get_preset(self.values["preset"]),
            c=self.number("c"),
            detection_cost=parse_number(override) if override else None,
        )


def read_ini(path: str | Path, command: str) -> dict[str, str]:
    """Values from the ``[model]`` and ``[<command>]`` sections of a file."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise DomainError(f"cannot read config {path}: {exc}") from None
    out: dict[str, str] = {}
    for section in ("model", command):
        if parser.has_section(section):
            for k, v in parser[section].items():
                if k not in DEFAULTS:
                    raise DomainError(f"unknown config key {k!r} in [{section}]")
                out[k] = v
    return out


def resolve(command: str, file_values: dict[str, str], flag_values: dict[str, str | None]) -> ExperimentConfig:
    """Defaults, then file values, then command-line flags."""
    values = dict(DEFAULTS)
    values.update(file_values)
    values.update({k: v for k, v in flag_values.items() if v is not None})
    return ExperimentConfig(command=command, values=values)
