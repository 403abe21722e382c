"""Flat key-value run configuration files.

Format: UTF-8 text, one `section.key = value` per line, `#` comments and
blank lines ignored.  One level of nesting only.  Unknown keys are
rejected.  Example:

    params.kappa1 = 1.0
    params.kappa2 = 0.0
    params.r = 0.70710678
    params.eta = g
    pulse1.kind = gaussian
    pulse1.omega = 1.46
    pulse1.tau = 3.0
    pulse2.kind = vacuum
    scheme.kind = hh
    run.dt = 0.001
    run.t0 = auto
    run.t1 = auto
    run.n_traj = 0
    run.seed = 1
    run.renormalize = false
    run.oracle_compare = false

`run.t0` / `run.t1` accept `auto` (window derived from the pulses and
couplings).  `params.eta` is `g`, `e`, or two comma-separated complex
amplitudes `a_e, a_g` (must be normalized).
"""

from __future__ import annotations

import math

import numpy as np

from .engine import SimulationConfig
from .filters import ModelParams, homodyne_photocount, two_homodyne
from .pulses import PulseShape, delayed_rising_exp, gaussian, rising_exp, vacuum

__all__ = ["ConfigError", "parse_config_file", "parse_config", "config_summary"]


class ConfigError(ValueError):
    """Malformed configuration file or invalid parameter values."""


_KNOWN_KEYS = {
    "params.kappa1",
    "params.kappa2",
    "params.r",
    "params.eta",
    "pulse1.kind",
    "pulse1.gamma",
    "pulse1.T",
    "pulse1.omega",
    "pulse1.tau",
    "pulse2.kind",
    "pulse2.gamma",
    "pulse2.T",
    "pulse2.omega",
    "pulse2.tau",
    "scheme.kind",
    "run.dt",
    "run.t0",
    "run.t1",
    "run.n_traj",
    "run.seed",
    "run.renormalize",
    "run.oracle_compare",
}

_REQUIRED = {"params.kappa1", "params.kappa2", "pulse1.kind", "pulse2.kind"}

_DEFAULTS = {
    "params.r": repr(1.0 / math.sqrt(2.0)),
    "params.eta": "g",
    "scheme.kind": "hh",
    "run.dt": "1e-3",
    "run.t0": "auto",
    "run.t1": "auto",
    "run.n_traj": "0",
    "run.seed": "0",
    "run.renormalize": "false",
    "run.oracle_compare": "false",
}


def _parse_lines(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _get_float(kv, key):
    try:
        return float(kv[key])
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {kv[key]!r}") from None


def _get_bool(kv, key):
    v = kv[key].lower()
    if v in ("true", "1", "yes", "on"):
        return True
    if v in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {kv[key]!r}")


def _parse_pulse(kv, section) -> PulseShape:
    kind = kv[f"{section}.kind"].lower()
    def need(suffix):
        key = f"{section}.{suffix}"
        if key not in kv:
            raise ConfigError(f"{section}.kind={kind} requires {key}")
        return _get_float(kv, key)

    try:
        if kind == "vacuum":
            return vacuum()
        if kind == "rising_exp":
            return rising_exp(need("gamma"))
        if kind == "delayed_rising_exp":
            return delayed_rising_exp(need("gamma"), need("T"))
        if kind == "gaussian":
            return gaussian(need("omega"), need("tau"))
    except ValueError as exc:
        raise ConfigError(f"{section}: {exc}") from exc
    raise ConfigError(f"{section}.kind: unknown pulse kind {kind!r}")


def _parse_eta(text: str) -> np.ndarray:
    t = text.strip().lower()
    if t == "g":
        return np.array([0.0, 1.0], dtype=complex)
    if t == "e":
        return np.array([1.0, 0.0], dtype=complex)
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(f"params.eta: expected 'g', 'e' or 'a_e, a_g', got {text!r}")
    try:
        return np.array([complex(p.strip()) for p in parts])
    except ValueError:
        raise ConfigError(f"params.eta: cannot parse amplitudes {text!r}") from None


def parse_config_file(path) -> SimulationConfig:
    """Parse and validate a configuration file into a SimulationConfig."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    kv = _parse_lines(text)
    missing = _REQUIRED - kv.keys()
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(sorted(missing))}")
    for key, default in _DEFAULTS.items():
        kv.setdefault(key, default)

    scheme_kind = kv["scheme.kind"].lower()
    if scheme_kind == "hh":
        scheme = two_homodyne()
    elif scheme_kind == "hp":
        scheme = homodyne_photocount()
    else:
        raise ConfigError(f"scheme.kind: expected 'hh' or 'hp', got {scheme_kind!r}")

    try:
        params = ModelParams(
            kappa1=_get_float(kv, "params.kappa1"),
            kappa2=_get_float(kv, "params.kappa2"),
            r=_get_float(kv, "params.r"),
            pulse1=_parse_pulse(kv, "pulse1"),
            pulse2=_parse_pulse(kv, "pulse2"),
            eta=_parse_eta(kv["params.eta"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    def window(key):
        return None if kv[key].lower() == "auto" else _get_float(kv, key)

    try:
        n_traj = int(kv["run.n_traj"])
        seed = int(kv["run.seed"])
    except ValueError as exc:
        raise ConfigError(f"run.n_traj / run.seed must be integers: {exc}") from None

    try:
        return SimulationConfig(
            params=params,
            scheme=scheme,
            dt=_get_float(kv, "run.dt"),
            t0=window("run.t0"),
            t1=window("run.t1"),
            n_traj=n_traj,
            seed=seed,
            renormalize=_get_bool(kv, "run.renormalize"),
            oracle_compare=_get_bool(kv, "run.oracle_compare"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(name_or_path) -> SimulationConfig:
    """Resolve a preset name or a config-file path into a SimulationConfig."""
    from .presets import PRESETS

    text = str(name_or_path)
    if text in PRESETS:
        return PRESETS[text].cfg
    import os

    if not os.path.exists(text):
        raise ConfigError(
            f"{text!r} is neither a preset ({', '.join(PRESETS)}) nor a file"
        )
    return parse_config_file(text)


def config_summary(cfg: SimulationConfig) -> dict:
    """JSON-serializable echo of every physical and numerical parameter."""

    def pulse_dict(p: PulseShape) -> dict:
        d = {"kind": p.kind}
        if p.kind in ("rising_exp", "delayed_rising_exp"):
            d["gamma"] = p.gamma
        if p.kind == "delayed_rising_exp":
            d["T"] = p.T
        if p.kind == "gaussian":
            d["omega"] = p.omega
            d["tau"] = p.tau
        return d

    pr = cfg.params
    return {
        "params": {
            "kappa1": pr.kappa1,
            "kappa2": pr.kappa2,
            "r": pr.r,
            "eta": [[z.real, z.imag] for z in pr.eta],
        },
        "pulse1": pulse_dict(pr.pulse1),
        "pulse2": pulse_dict(pr.pulse2),
        "scheme": cfg.scheme.kind,
        "run": {
            "dt": cfg.dt,
            "t0": cfg.t0,
            "t1": cfg.t1,
            "n_traj": cfg.n_traj,
            "seed": cfg.seed,
            "renormalize": cfg.renormalize,
            "oracle_compare": cfg.oracle_compare,
        },
    }
