"""Run configuration: a nested YAML document merged over documented defaults."""

from __future__ import annotations

import copy
import hashlib
import json

import yaml

from . import __version__
from .detection import PRESETS
from .profiles import TABLE1


class ConfigError(ValueError):
    def __init__(self, path, msg):
        self.path = path
        super().__init__(f"{path}: {msg}")


DEFAULTS = {
    # named ion/bath combination; see ionbath.profiles.TABLE1
    "profile": "yb171_rb22",
    "bath": {
        "density_m3": 1.0e18,
    },
    "pair": {
        "C4": None,  # J m^4; null = calibrated from gamma_L/n_a = 2.1e-15 m^3/s
        "E_coll_mK": 100.0,
    },
    "relaxation": {
        "T1": None,  # t_L; null = profile value
        "p_inf": None,  # null = profile value
    },
    "branching": {
        "epsilon": None,  # null = 1 for F=2 baths, 0 for F=1 baths
        "energy_floor_mK": 20.0,
        "initial_energy_mK": 0.5,
        "sampled_angles": False,
    },
    "detection": None,  # preset name; null = profile's preset
    "seed": 0,
    "ensemble_size": 20000,
    "block_size": 4096,
    "time_grid": {"stop": 10.0, "num": 21},
    "ramsey": {
        "wait_time_ms": 27.0,
        "contrast": 0.55,
        "rate_excited": 1.0 / 1.4,
        "rate_ground": 0.0,
        "exposures": [0.0, 0.5, 1.0, 1.5, 2.0, 3.0],
        "detuning_span_hz": 111.0,
        "detuning_points": 41,
        "n_trials": 200,
    },
    "fit": {
        "C0_fixed": None,
    },
    "workers": 1,
    "out": "out",
}


def _merge(base, over, path=""):
    out = copy.deepcopy(base)
    for k, v in over.items():
        p = f"{path}.{k}" if path else k
        if k not in base:
            raise ConfigError(p, "unknown key")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(p, "expected a mapping")
            out[k] = _merge(base[k], v, p)
        else:
            out[k] = v
    return out


def _check(cond, path, msg):
    if not cond:
        raise ConfigError(path, msg)


def validate(cfg):
    _check(cfg["profile"] in TABLE1, "profile", f"unknown profile; choose from {sorted(TABLE1)}")
    _check(cfg["detection"] is None or cfg["detection"] in PRESETS, "detection",
           f"unknown preset; choose from {sorted(PRESETS)}")
    _check(_num(cfg["bath"]["density_m3"]) and cfg["bath"]["density_m3"] >= 0, "bath.density_m3", "must be >= 0")
    c4 = cfg["pair"]["C4"]
    _check(c4 is None or (_num(c4) and c4 > 0), "pair.C4", "must be positive")
    _check(_num(cfg["pair"]["E_coll_mK"]) and cfg["pair"]["E_coll_mK"] > 0, "pair.E_coll_mK", "must be positive")
    T1, p = cfg["relaxation"]["T1"], cfg["relaxation"]["p_inf"]
    _check(T1 is None or (_num(T1) and T1 > 0), "relaxation.T1", "must be positive")
    _check(p is None or (_num(p) and 0 <= p <= 1), "relaxation.p_inf", "must be a probability")
    eps = cfg["branching"]["epsilon"]
    _check(eps is None or (_num(eps) and 0 <= eps <= 1), "branching.epsilon", "must lie in [0, 1]")
    _check(_num(cfg["branching"]["energy_floor_mK"]) and cfg["branching"]["energy_floor_mK"] >= 0,
           "branching.energy_floor_mK", "must be >= 0")
    _check(isinstance(cfg["branching"]["sampled_angles"], bool), "branching.sampled_angles", "must be a boolean")
    _check(isinstance(cfg["seed"], int) and 0 <= cfg["seed"] < 2**64, "seed", "must be a 64-bit unsigned integer")
    for key in ("ensemble_size", "block_size", "workers"):
        _check(isinstance(cfg[key], int) and cfg[key] >= 1, key, "must be a positive integer")
    g = cfg["time_grid"]
    _check(_num(g["stop"]) and g["stop"] > 0, "time_grid.stop", "must be positive")
    _check(isinstance(g["num"], int) and g["num"] >= 2, "time_grid.num", "must be an integer >= 2")
    r = cfg["ramsey"]
    _check(_num(r["wait_time_ms"]) and r["wait_time_ms"] > 0, "ramsey.wait_time_ms", "must be positive")
    _check(_num(r["contrast"]) and 0 <= r["contrast"] <= 1, "ramsey.contrast", "must lie in [0, 1]")
    _check(_num(r["rate_excited"]) and _num(r["rate_ground"]) and r["rate_excited"] >= 0
           and r["rate_ground"] >= 0 and r["rate_excited"] + r["rate_ground"] <= 1,
           "ramsey.rate_excited", "rates must be >= 0 with sum <= 1 per t_L")
    _check(isinstance(r["exposures"], list) and all(_num(x) and x >= 0 for x in r["exposures"]),
           "ramsey.exposures", "must be a list of non-negative times")
    _check(isinstance(r["n_trials"], int) and r["n_trials"] >= 1, "ramsey.n_trials", "must be a positive integer")
    _check(isinstance(r["detuning_points"], int) and r["detuning_points"] >= 6, "ramsey.detuning_points", "must be >= 6")
    c0 = cfg["fit"]["C0_fixed"]
    _check(c0 is None or (_num(c0) and 0 < c0 <= 1), "fit.C0_fixed", "must lie in (0, 1]")
    return cfg


def _num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def load(path=None, overrides=None):
    """Read ``path`` (YAML; may be empty), merge over defaults and validate."""
    user = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            try:
                user = yaml.safe_load(fh) or {}
            except yaml.YAMLError as exc:
                raise ConfigError("<file>", f"not valid YAML: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("<root>", "expected a mapping")
    cfg = _merge(DEFAULTS, user)
    if overrides:
        cfg = _merge(cfg, overrides)
    return validate(cfg)


def dump(cfg):
    return yaml.safe_dump(cfg, sort_keys=False)


#: Keys that do not influence any result and are left out of the hash.
_EXECUTION_KEYS = ("workers", "out")


def config_hash(cfg):
    content = {k: v for k, v in cfg.items() if k not in _EXECUTION_KEYS}
    text = json.dumps(content, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def provenance(cfg):
    return {"toolkit": "ionbath", "version": __version__, "config_sha256": config_hash(cfg)}
