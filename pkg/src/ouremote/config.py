"""Experiment configuration: JSON file, schema validation, defaults, hashing."""

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources

import jsonschema

from .channel import NoiseModel, ServiceModel
from .policy import OptimalThreshold, Periodic, ZeroWait
from .process import OuParams

SIM_DEFAULTS = {
    "dt_override": None,
    "n_cycles": 20000,
    "n_search": 2000,
    "horizon": None,
    "n_traj": 16,
    "tol_rel": 1e-3,
    "lemma_draws": 10**6,
}

FIG2_ALPHAS = [0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6]

FIG2_DEFAULT = {
    "process": {"theta": 0.5, "mu": 0.0, "sigma": 1.0},
    "service": {"kind": "lognormal", "alpha": 1.0},
    "noise": {"b1": 0.1, "b2": 0.1},
    "policy": {"kind": "solve"},
    "sim": {"master_seed": 0},
    "sweep": {"variable": "alpha", "values": FIG2_ALPHAS},
}


class ConfigError(ValueError):
    """Malformed or invalid configuration; the message names the location."""


def schema():
    text = resources.files("ouremote").joinpath("data/config.schema.json").read_text()
    return json.loads(text)


def _validate(raw):
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        if e.validator == "oneOf" and e.context:
            # report the branch selected by "kind" rather than the union
            kind_misses = {id(c) for c in e.context if list(c.relative_path) == ["kind"]}
            branches = {}
            for c in e.context:
                branches.setdefault(c.schema_path[0], []).append(c)
            for errs in branches.values():
                if not any(id(c) in kind_misses for c in errs):
                    e = errs[0]
                    break
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError("field %s: %s" % (where, e.message))


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated configuration with every default filled in."""

    data: dict

    @classmethod
    def from_dict(cls, raw, seed=None):
        raw = copy.deepcopy(raw)
        if seed is not None:
            raw.setdefault("sim", {})["master_seed"] = int(seed)
        _validate(raw)
        if "master_seed" not in raw.get("sim", {}):
            raise ConfigError("field sim/master_seed: required (or pass --seed)")
        out = {
            "process": {"mu": 0.0, **raw["process"]},
            "service": raw.get("service", {"kind": "constant", "c": 1.0}),
            "noise": {"b1": 0.0, "b2": 0.0, **raw.get("noise", {})},
            "policy": raw.get("policy", {"kind": "solve"}),
            "sim": {**SIM_DEFAULTS, **raw["sim"]},
        }
        if "sweep" in raw:
            out["sweep"] = {"variable": "alpha", **raw["sweep"]}
        try:
            ServiceModel.from_dict(out["service"])
            OuParams(**out["process"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return cls(out)

    @classmethod
    def from_text(cls, text, seed=None):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("line %d column %d: %s" % (exc.lineno, exc.colno, exc.msg)) from exc
        return cls.from_dict(raw, seed)

    @classmethod
    def load(cls, path, seed=None):
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read(), seed)

    def canonical(self):
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    @property
    def seed(self):
        return self.data["sim"]["master_seed"]

    @property
    def sim(self):
        return self.data["sim"]

    @property
    def params(self):
        return OuParams(**self.data["process"])

    @property
    def service(self):
        return ServiceModel.from_dict(self.data["service"])

    @property
    def noise(self):
        return NoiseModel(self.data["noise"]["b1"], self.data["noise"]["b2"])

    def policy(self):
        """The configured fixed policy, or None when the threshold is to be solved."""
        p = self.data["policy"]
        if p["kind"] == "threshold":
            return OptimalThreshold(p["v"])
        if p["kind"] == "zero_wait":
            return ZeroWait()
        if p["kind"] == "periodic":
            return Periodic(p["period"])
        return None

    def with_service(self, service):
        data = copy.deepcopy(self.data)
        data["service"] = service.to_dict()
        return ExperimentConfig(data)
