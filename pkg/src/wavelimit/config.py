"""
Strict INI-style experiment configuration.

Every section and key is declared in ``SCHEMA``; anything else is rejected.
Which keys are required depends on the subcommand (``REQUIRED``), and all
missing keys are reported together in one error.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError

_REQ = object()


def _float(text: str) -> float:
    t = text.strip().lower()
    sign = -1.0 if t.startswith("-") else 1.0
    t = t.lstrip("+-")
    if t.endswith("pi"):
        head = t[:-2].rstrip("*").strip()
        return sign * (float(head) if head else 1.0) * math.pi
    return sign * float(t)


def _floats(text: str) -> list[float]:
    return [_float(p) for p in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(p) for p in text.replace(",", " ").split()]


def _words(text: str) -> list[str]:
    return [p for p in text.replace(",", " ").split()]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


SCHEMA = {
    "grid": {
        "dimension": (int, 1),
        "lower": (_floats, _REQ),
        "upper": (_floats, _REQ),
        "counts": (_ints, _REQ),
    },
    "coefficients": {
        "a": (_float, 1.0),
        "beta": (_float, 0.0),
    },
    "nonlinearity": {
        "kind": (str, "cubic"),
        "lam": (_float, 2.0),
        "lam_width": (_float, 0.0),  # >0: lam * exp(-|x|^2 / width^2)
        "gamma": (_float, 1.0),
        "g": (_float, 0.0),
        "mu_bar": (_float, 4.0),
        "c": (_float, None),
        "audit_pairs": (int, 1000),
        "audit_safety": (_float, 1.05),
    },
    "flow": {
        "eps": (_float, _REQ),
        "dt": (_float, _REQ),
        "T": (_float, _REQ),
        "snapshot_every": (int, 1),
        "initial": (str, "sine"),  # sine | bump | zero
        "amplitude": (_float, 1.0),
        "mode": (int, 1),
        "support": (_float, 3.0),
        "velocity": (str, "zero"),  # zero | manifold
        "delta": (_float, None),
        "ladder": (_floats, _REQ),
        "functionals": (_words, ["tilde_V", "V", "F_eps", "F_zero"]),
        "min_order": (_float, 1.0),
        "min_r2": (_float, 0.98),
        "tail_ks": (_floats, _REQ),
        "oracle_tol": (_float, 1e-3),
    },
    "attractor": {
        "modes": (int, 4),
        "radius": (_float, _REQ),
        "members": (int, _REQ),
        "T0": (_float, _REQ),
        "T_sample": (_float, _REQ),
        "stride": (int, 1),
        "lift": (_bool, True),
    },
    "sweep": {
        "eps": (_floats, _REQ),
        "alpha": (_float, 1.0),
    },
    "output": {
        "dir": (str, "out"),
        "snapshots": (_bool, True),
    },
}

# keys that must be present for each subcommand (beyond those with defaults)
REQUIRED = {
    "simulate": {"grid": ["lower", "upper", "counts"], "flow": ["eps", "dt", "T"]},
    "energy-audit": {"grid": ["lower", "upper", "counts"], "flow": ["eps", "T", "ladder"]},
    "growth-audit": {"grid": ["lower", "upper", "counts"]},
    "tails": {"grid": ["lower", "upper", "counts"], "flow": ["eps", "dt", "T", "tail_ks"]},
    "attractor": {
        "grid": ["lower", "upper", "counts"],
        "flow": ["eps", "dt"],
        "attractor": ["radius", "members", "T0", "T_sample"],
    },
    "sweep": {
        "grid": ["lower", "upper", "counts"],
        "flow": ["dt"],
        "attractor": ["radius", "members", "T0", "T_sample"],
        "sweep": ["eps"],
    },
    "oracle-check": {"grid": ["lower", "upper", "counts"], "flow": ["eps", "dt", "T"]},
}


@dataclass(frozen=True)
class Config:
    sections: dict
    digest: str
    source: str

    def __getitem__(self, section: str) -> dict:
        return self.sections[section]


def parse_config(text: str, command: str, source: str = "<string>") -> Config:
    if command not in REQUIRED:
        raise ConfigurationError(f"unknown subcommand {command!r}")
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str  # keys are case-sensitive (T, T0)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as err:
        raise ConfigurationError(f"{source}: {err}") from err
    problems = []
    for sec in cp.sections():
        if sec not in SCHEMA:
            problems.append(f"unknown section [{sec}]")
            continue
        for key in cp[sec]:
            if key not in SCHEMA[sec]:
                problems.append(f"unknown key {key!r} in [{sec}]")
    missing = []
    for sec, keys in REQUIRED[command].items():
        for key in keys:
            if not (cp.has_section(sec) and key in cp[sec]):
                missing.append(f"[{sec}] {key}")
    if missing:
        problems.append("missing required keys: " + ", ".join(missing))
    if problems:
        raise ConfigurationError(f"{source}: " + "; ".join(problems))
    out = {}
    for sec, keys in SCHEMA.items():
        vals = {}
        for key, (conv, default) in keys.items():
            if cp.has_section(sec) and key in cp[sec]:
                raw = cp[sec][key]
                try:
                    vals[key] = conv(raw)
                except ValueError as err:
                    problems.append(f"[{sec}] {key} = {raw!r}: {err}")
            elif default is not _REQ:
                vals[key] = default
        out[sec] = vals
    if problems:
        raise ConfigurationError(f"{source}: " + "; ".join(problems))
    return Config(out, hashlib.sha256(text.encode()).hexdigest(), source)


def load_config(path, command: str) -> Config:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as err:
        raise ConfigurationError(f"cannot read config {path}: {err}") from err
    return parse_config(text, command, str(p))
