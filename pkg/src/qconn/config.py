"""Run configuration for the command line driver."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .lattice import LatticeManifold, seeded_spd_metric

DEFAULTS = {
    "manifold": {"n": [4, 4, 4], "L": [1.0, 1.0, 1.0], "metric": {"kind": "flat"}},
    "group": {"N": 2, "kind": "SU"},
    "seed": 1,
    "bandlimits": {"connection": 1, "gauge": 1, "kernel": 1},
    "amplitudes": {"connection": 1.0, "gauge": 1.0},
    "hbar": [0.25, 0.125, 0.0625],
    "steps": 16,
    # 1-d lattice for the hbar -> 0 order studies
    "convergence": {"n": 256, "L": 1.0},
    "trials": 20,
    "refine": 2,
    "options": {"power_iterations": 300, "corrupt_kernel_entry": False},
}

# offsets added to the base seed for each synthesized object
SEED_OFFSETS = {"connection": 0, "gauge": 1, "kernel": 2, "state": 3, "metric": 4, "rotation": 5}


class ConfigError(DomainError):
    """Invalid run configuration."""


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(base[key], dict) and isinstance(value, dict) and key != "metric":
            out[key] = _merge(base[key], value)
        else:
            out[key] = value
    return out


@dataclass
class RunConfig:
    raw: dict

    @classmethod
    def from_dict(cls, data=None, seed=None):
        raw = _merge(DEFAULTS, data or {})
        if seed is not None:
            raw["seed"] = int(seed)
        cfg = cls(raw)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path=None, seed=None):
        data = None
        if path is not None:
            try:
                with open(path) as fh:
                    data = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError("config must be a JSON object")
        return cls.from_dict(data, seed)

    def __getitem__(self, key):
        return self.raw[key]

    def seed(self, what):
        return int(self.raw["seed"]) + SEED_OFFSETS[what]

    @property
    def n(self):
        return self.raw["group"]["N"]

    @property
    def group_kind(self):
        return self.raw["group"]["kind"]

    def validate(self):
        r = self.raw
        m = r["manifold"]
        try:
            shape = [int(v) for v in m["n"]]
            lengths = [float(v) for v in m["L"]]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"manifold.n / manifold.L malformed: {exc}") from exc
        if not 1 <= len(shape) <= 3 or len(lengths) != len(shape):
            raise ConfigError("manifold needs 1 to 3 axes with matching n and L")
        if min(shape) < 1 or min(lengths) <= 0:
            raise ConfigError("manifold.n and manifold.L must be positive")
        if int(r["seed"]) < 0:
            raise ConfigError("seed must be a non-negative integer")
        if r["group"]["kind"] not in ("SU", "U") or int(r["group"]["N"]) < 1:
            raise ConfigError("group must be SU or U with N >= 1")
        for name, b in r["bandlimits"].items():
            if int(b) < 0 or 2 * int(b) >= min(shape):
                raise ConfigError(f"bandlimits.{name} = {b} must satisfy 0 <= b < min(n)/2 = {min(shape) / 2}")
        conv_n = int(r["convergence"]["n"])
        for name in ("connection", "gauge"):
            if 2 * int(r["bandlimits"][name]) >= conv_n:
                raise ConfigError(f"bandlimits.{name} too large for the convergence lattice")
        hb = r["hbar"]
        if not isinstance(hb, list) or not hb or any(not 0 < float(h) <= 1 for h in hb):
            raise ConfigError("hbar must be a non-empty list of values in (0, 1]")
        conv_h = float(r["convergence"]["L"]) / conv_n
        for h in hb:
            mult = float(h) / conv_h
            if abs(mult - round(mult)) > 1e-9 * max(1.0, mult) or 2 * float(h) > float(r["convergence"]["L"]):
                raise ConfigError(f"hbar = {h} is not a multiple of the convergence spacing {conv_h} "
                                  "below half the period")
        if int(r["steps"]) < 1 or int(r["trials"]) < 1 or int(r["refine"]) < 2:
            raise ConfigError("steps and trials must be >= 1, refine >= 2")
        kind = m["metric"].get("kind")
        if kind not in ("flat", "diagonal", "seeded_spd"):
            raise ConfigError(f"unknown metric kind {kind!r}")
        if kind == "diagonal":
            vals = m["metric"].get("values", [])
            if len(vals) != len(shape) or min(vals) <= 0:
                raise ConfigError("diagonal metric needs d positive values")
        try:
            self.lattice()
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    def lattice(self, refine=1):
        m = self.raw["manifold"]
        shape = tuple(int(v) * refine for v in m["n"])
        lengths = tuple(float(v) for v in m["L"])
        metric_cfg = m["metric"]
        kind = metric_cfg.get("kind")
        if kind == "flat":
            return LatticeManifold.flat(shape, lengths)
        s, d = int(np.prod(shape)), len(shape)
        if kind == "diagonal":
            return LatticeManifold(shape, lengths, np.broadcast_to(np.diag(metric_cfg["values"]), (s, d, d)))
        q = seeded_spd_metric(shape, lengths, int(metric_cfg.get("seed", self.seed("metric"))),
                              int(metric_cfg.get("bandlimit", 1)), float(metric_cfg.get("amplitude", 0.3)))
        return LatticeManifold(shape, lengths, q)

    def convergence_lattice(self):
        c = self.raw["convergence"]
        return LatticeManifold.flat((int(c["n"]),), (float(c["L"]),))

    def to_json(self):
        return self.raw
