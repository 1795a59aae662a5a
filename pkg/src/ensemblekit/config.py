"""Experiment configuration: JSON schema validation, defaults, canonical hashing.

The loader validates against the embedded JSON Schema (also shipped at
docs/config.schema.json), fills defaults, deduplicates temperature lists, and
warns about unknown keys instead of failing on them.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .operators import ModelSpec

logger = logging.getLogger(__name__)

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "ensemblekit experiment configuration",
    "type": "object",
    "required": ["model", "temperatures"],
    "properties": {
        "model": {
            "type": "object",
            "required": ["family", "n"],
            "properties": {
                "family": {"enum": ["tfim", "heisenberg", "random_klocal", "explicit"]},
                "n": {
                    "oneOf": [
                        {"type": "integer", "minimum": 1},
                        {"type": "array", "minItems": 1,
                         "items": {"type": "integer", "minimum": 1}},
                    ]
                },
                "d": {"type": "integer", "minimum": 1},
                "local_dim": {"type": "integer", "minimum": 2},
                "k": {"type": "integer", "minimum": 0},
                "params": {"type": "object"},
                "seed": {"type": "integer"},
            },
        },
        "temperatures": {
            "type": "array", "minItems": 1,
            "items": {"type": "number", "exclusiveMinimum": 0},
        },
        "cube_lengths": {
            "type": "array", "minItems": 1,
            "items": {"type": "integer", "minimum": 1},
        },
        "energy_targets": {
            "oneOf": [
                {"const": "u(T)"},
                {"type": "array", "minItems": 1, "items": {"type": "number"}},
            ]
        },
        "deltas": {
            "oneOf": [
                {"const": "paper-window"},
                {"type": "array", "minItems": 1,
                 "items": {"type": "number", "exclusiveMinimum": 0}},
            ]
        },
        "epsilons": {
            "type": "array", "minItems": 1,
            "items": {"type": "number", "exclusiveMinimum": 0},
        },
        "C_d": {"type": "number", "minimum": 1},
        "correlation": {
            "type": "object",
            "properties": {
                "distances": {"type": "array", "minItems": 1,
                              "items": {"type": "integer", "minimum": 1}},
                "restarts": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
            },
        },
        "haar": {
            "type": "object",
            "required": ["samples"],
            "properties": {
                "samples": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
            },
        },
        "output_dir": {"type": "string"},
    },
}

_KNOWN_KEYS = {
    "": set(CONFIG_SCHEMA["properties"]),
    "model": set(CONFIG_SCHEMA["properties"]["model"]["properties"]),
    "correlation": set(CONFIG_SCHEMA["properties"]["correlation"]["properties"]),
    "haar": set(CONFIG_SCHEMA["properties"]["haar"]["properties"]),
}


@dataclass
class ExperimentConfig:
    """Validated configuration with defaults resolved."""

    model: dict
    temperatures: list[float]
    cube_lengths: list[int]
    energy_targets: str | list[float]
    deltas: str | list[float]
    epsilons: list[float]
    c_d: float
    correlation: dict
    haar: dict | None
    output_dir: str
    normalized: dict = field(repr=False, default_factory=dict)

    @property
    def lattice_sizes(self) -> list[int]:
        n = self.model["n"]
        return list(n) if isinstance(n, list) else [n]

    def model_spec(self, n: int) -> ModelSpec:
        obj = dict(self.model)
        obj["n"] = n
        return ModelSpec.from_dict(obj)

    def config_hash(self) -> str:
        canonical = json.dumps(self.normalized, sort_keys=True,
                               separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def _warn_unknown(obj: dict, scope: str) -> None:
    known = _KNOWN_KEYS.get(scope, set())
    for key in obj:
        if key not in known:
            logger.warning("config: ignoring unknown key %r%s", key,
                           f" in {scope!r}" if scope else "")


def validate_config(path) -> ExperimentConfig:
    """Load, schema-validate, and normalize a config file.

    Raises ConfigError (exit code 2 at the CLI) with the offending field path.
    """
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}", field_path="")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}", field_path="") from exc
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    validator = jsonschema.Draft7Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        field_path = ".".join(str(x) for x in err.absolute_path)
        raise ConfigError(f"config field {field_path or '<root>'}: {err.message}",
                          field_path=field_path)

    _warn_unknown(raw, "")
    _warn_unknown(raw.get("model", {}), "model")
    if isinstance(raw.get("correlation"), dict):
        _warn_unknown(raw["correlation"], "correlation")
    if isinstance(raw.get("haar"), dict):
        _warn_unknown(raw["haar"], "haar")

    temperatures = []
    for t in raw["temperatures"]:
        if t in temperatures:
            logger.warning("config: duplicate temperature %s dropped", t)
        else:
            temperatures.append(float(t))

    model = {
        "family": raw["model"]["family"],
        "n": raw["model"]["n"],
        "d": int(raw["model"].get("d", 1)),
        "local_dim": int(raw["model"].get("local_dim", 2)),
        "k": int(raw["model"].get("k", 1)),
        "params": dict(raw["model"].get("params", {})),
        "seed": int(raw["model"].get("seed", 0)),
    }
    corr_raw = raw.get("correlation", {})
    sizes = model["n"] if isinstance(model["n"], list) else [model["n"]]
    max_dist = max(2, min(sizes) - 2)
    correlation = {
        "distances": [int(x) for x in corr_raw.get(
            "distances", list(range(1, min(max_dist, 5) + 1)))],
        "restarts": int(corr_raw.get("restarts", 16)),
        "seed": int(corr_raw.get("seed", 0)),
    }
    haar = None
    if "haar" in raw:
        haar = {"samples": int(raw["haar"]["samples"]),
                "seed": int(raw["haar"].get("seed", 0))}

    energy_targets = raw.get("energy_targets", "u(T)")
    if isinstance(energy_targets, list):
        energy_targets = [float(x) for x in energy_targets]
    deltas = raw.get("deltas", "paper-window")
    if isinstance(deltas, list):
        deltas = [float(x) for x in deltas]

    cfg = ExperimentConfig(
        model=model,
        temperatures=temperatures,
        cube_lengths=[int(x) for x in raw.get("cube_lengths", [1])],
        energy_targets=energy_targets,
        deltas=deltas,
        epsilons=[float(x) for x in raw.get("epsilons", [0.25])],
        c_d=float(raw.get("C_d", 1.0)),
        correlation=correlation,
        haar=haar,
        output_dir=str(raw.get("output_dir", "ensemblekit-out")),
    )
    cfg.normalized = {
        "model": model,
        "temperatures": cfg.temperatures,
        "cube_lengths": cfg.cube_lengths,
        "energy_targets": cfg.energy_targets,
        "deltas": cfg.deltas,
        "epsilons": cfg.epsilons,
        "C_d": cfg.c_d,
        "correlation": cfg.correlation,
        "haar": cfg.haar,
        "output_dir": cfg.output_dir,
    }
    # validate every lattice size eagerly so errors surface before computation
    for n in cfg.lattice_sizes:
        try:
            cfg.model_spec(n)
        except Exception as exc:
            raise ConfigError(f"config field model: {exc}", field_path="model") from exc
    return cfg
