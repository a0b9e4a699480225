"""Experiment configuration: TOML or JSON input, JSON mirror output.

Every key and its default lives in :data:`DEFAULTS`; ``kg2d defaults``
prints them. Unknown keys are rejected so that typos fail loudly.
"""

from __future__ import annotations

import copy
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

EXPERIMENTS = ("ground-state", "dichotomy", "boost-check", "bridge", "decay-fit", "decoupling", "custom-evolve", "virial")
PRESETS = ("scaled-Q", "gaussian", "wave-packet")

DEFAULTS: dict = {
    "experiment": "custom-evolve",
    "grid": {"n": 256, "L": 40.0},
    "mu": -1,
    "dt": 1e-3,
    "T": 1.0,
    "store_every": 0,  # 0 keeps only the first and last states
    "snapshot_every": 0,  # 0 writes no KGF1 snapshots
    "seed": 0,
    "data": {
        "preset": "gaussian",
        "eps": 0.0,  # scaled-Q: u0 = (1 + eps) Q
        "amplitude": 1.0,
        "width": 1.0,
        "center": [0.0, 0.0],
        "momentum": [0.0, 0.0],  # plane-wave modulation cos(k . x)
        "ut_amplitude": 0.0,
        "noise": 0.0,  # smooth noise amplitude, drawn from Philox(seed)
        "noise_cutoff": 2.0,
        "lam": 1.0,  # wave-packet scale
        "nu": [0.0, 0.0],
        "t0": 0.0,
        "x0": [0.0, 0.0],
        "theta": 0.01,
    },
    "limits": {"blowup_threshold": 1e6, "drift_tol": 1e-2, "boundary_mass_max": 1e-4},
    "ground_state": {"tol": 1e-10},
    "boost": {"nus": [[0.2, 0.0], [0.5, 0.0]], "span_margin": 1.0, "store_every": 1},
    "bridge": {"lambdas": [4.0, 8.0, 16.0], "T": 1.0, "n": 64, "L_slow": 48.0, "dt": 0.02, "sigma": 4.0, "amplitude": 2.0},
    "decay": {"N": 2, "t_min": 5.0, "t_max": 50.0, "samples": 24},
    "decoupling": {"T": 10.0, "dt": 0.05},
    "virial": {"R": 5.0, "eps": 0.5},
}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        where = f"{path}{k}"
        if k not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{where!r} must be a table")
            out[k] = _merge(base[k], v, where + ".")
        else:
            out[k] = v
    return out


def _num(d: dict, key: str, lo: float, hi: float, where: str, integer: bool = False):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where}{key} must be a finite number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{where}{key} must be an integer, got {v!r}")
    if not lo <= v <= hi:
        raise ConfigError(f"{where}{key} = {v} outside [{lo}, {hi}]")
    return int(v) if integer else float(v)


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    def __post_init__(self):
        validate(self.values)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def experiment(self) -> str:
        return self.values["experiment"]

    def section(self, name: str) -> dict:
        return self.values[name]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.values)

    def to_json(self) -> str:
        return json.dumps(self.values, indent=2, sort_keys=True) + "\n"

    def with_overrides(self, **over) -> "ExperimentConfig":
        return ExperimentConfig(_merge(self.values, over))


def validate(v: dict) -> None:
    if v["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {v['experiment']!r}")
    n = _num(v["grid"], "n", 8, 4096, "grid.", integer=True)
    if n & (n - 1):
        raise ConfigError(f"grid.n must be a power of two, got {n}")
    _num(v["grid"], "L", 1e-6, 1e6, "grid.")
    if v["mu"] not in (1, -1):
        raise ConfigError(f"mu must be +1 or -1, got {v['mu']!r}")
    _num(v, "dt", 1e-6, 0.5, "")
    _num(v, "T", 0.0, 1e5, "")
    _num(v, "store_every", 0, 1e9, "", integer=True)
    _num(v, "snapshot_every", 0, 1e9, "", integer=True)
    _num(v, "seed", 0, 2**63 - 1, "", integer=True)
    d = v["data"]
    if d["preset"] not in PRESETS:
        raise ConfigError(f"data.preset must be one of {PRESETS}, got {d['preset']!r}")
    _num(d, "eps", -0.99, 10.0, "data.")
    _num(d, "width", 1e-6, 1e6, "data.")
    _num(d, "noise", 0.0, 1e3, "data.")
    _num(d, "lam", 1.0, 1e6, "data.")
    for key in ("center", "momentum", "nu", "x0"):
        if not (isinstance(d[key], list) and len(d[key]) == 2):
            raise ConfigError(f"data.{key} must be a 2-vector")
    lim = v["limits"]
    _num(lim, "blowup_threshold", 1e-12, 1e300, "limits.")
    _num(lim, "drift_tol", 0.0, 1e3, "limits.")
    _num(lim, "boundary_mass_max", 0.0, 1.0, "limits.")
    _num(v["ground_state"], "tol", 1e-12, 1e-6, "ground_state.")
    b = v["bridge"]
    if not b["lambdas"] or any(float(x) < 1 for x in b["lambdas"]):
        raise ConfigError("bridge.lambdas must be a nonempty list of scales >= 1")
    for i, nu in enumerate(v["boost"]["nus"]):
        if not (isinstance(nu, list) and len(nu) == 2):
            raise ConfigError(f"boost.nus[{i}] must be a 2-vector")


def load_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    """Read a ``.toml`` or ``.json`` file and merge it over the defaults."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    try:
        raw = json.loads(text) if p.suffix == ".json" else tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc
    merged = _merge(DEFAULTS, raw)
    if overrides:
        merged = _merge(merged, overrides)
    return ExperimentConfig(merged)


def from_dict(d: dict) -> ExperimentConfig:
    return ExperimentConfig(_merge(DEFAULTS, d))
