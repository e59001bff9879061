"""Run configuration: a JSON file naming the dataset, costs, and search knobs.

A config fully describes one experiment instance::

    {
      "dataset":   {"type": "synthetic", ...SyntheticSpec fields...}
                 | {"type": "csv", "path": "...", "label_column": "label"},
      "costs":     {"mode": "explicit" | "class_linear" | "class_exponential", ...},
      "threshold": 0.75,
      "split_seed": 0,
      "seeds":     [0, 1, 2],
      "max_stages": 3,
      "ga":        {"population_size": 300, "max_iter": 150, ...},
      "oracle":    {"cap": 1000000},
      "recovery":  {"front_file": "oracle-front.csv"},
      "sweep":     {"population_size": [100, 300], "mutation_rate": [0.05, 0.1], ...}
    }

Only "dataset", "costs", and "threshold" are required.  Manifests written
by the CLI embed a resolved config under a "config" key and can be passed
anywhere a config is accepted, which is how runs are replayed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .data import (
    CostSchedule,
    CostedDataset,
    SyntheticSpec,
    assemble_dataset,
    generate_synthetic,
    load_dataset,
)
from .evolution import GaConfig

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
    "build_dataset",
    "config_hash",
    "manifest_dict",
]

CONFIG_FORMAT_VERSION = "1"

_TOP_KEYS = {
    "dataset",
    "costs",
    "threshold",
    "split_seed",
    "seeds",
    "max_stages",
    "ga",
    "oracle",
    "recovery",
    "sweep",
}
_GA_KEYS = {
    "population_size",
    "max_iter",
    "mutation_rate",
    "crossover_rate",
    "elitism_fraction",
    "mutation_bias",
    "epsilon",
    "inc",
    "stall_generations",
}
_SWEEP_KEYS = {
    "population_size",
    "mutation_rate",
    "crossover_rate",
    "mutation_bias",
    "elitism_fraction",
    "max_iter",
}
_SYNTHETIC_KEYS = {
    "n_features",
    "n_informative",
    "n_records",
    "n_classes",
    "clusters_per_class",
    "class_sep",
    "label_noise",
    "seed",
}


class ConfigError(ValueError):
    """A malformed or inconsistent run configuration."""


@dataclass
class RunConfig:
    """Validated experiment description, with paths resolved."""

    source: str  # the config file this came from, for error context
    dataset: dict
    costs: CostSchedule
    threshold: float
    split_seed: int = 0
    seeds: list[int] = field(default_factory=lambda: [0])
    max_stages: int | None = None
    ga: dict = field(default_factory=dict)
    oracle_cap: int = 10**6
    recovery_front: str | None = None
    sweep: dict = field(default_factory=dict)

    def ga_config(self, seed: int) -> GaConfig:
        """GaConfig for one seed, with config-file overrides applied."""
        return GaConfig(rng_seed=seed, max_stages=self.max_stages, **self.ga)

    def as_dict(self) -> dict:
        """JSON-ready resolved form (what manifests embed and hashes cover)."""
        costs = {"mode": self.costs.mode}
        if self.costs.values is not None:
            costs["values"] = self.costs.values
        if self.costs.classes is not None:
            costs["classes"] = self.costs.classes
        if self.costs.mode == "class_linear":
            costs["scale"] = self.costs.scale
        out = {
            "dataset": self.dataset,
            "costs": costs,
            "threshold": self.threshold,
            "split_seed": self.split_seed,
            "seeds": self.seeds,
            "ga": self.ga,
            "oracle": {"cap": self.oracle_cap},
        }
        if self.max_stages is not None:
            out["max_stages"] = self.max_stages
        if self.recovery_front is not None:
            out["recovery"] = {"front_file": self.recovery_front}
        if self.sweep:
            out["sweep"] = self.sweep
        return out


def config_hash(cfg: RunConfig) -> str:
    """Short stable digest of the resolved config, stamped on every output."""
    payload = json.dumps(cfg.as_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def _require(obj: dict, key: str, source: str):
    if key not in obj:
        raise ConfigError(f"{source}: missing required key {key!r}")
    return obj[key]


def _check_keys(obj: dict, allowed: set, source: str, where: str) -> None:
    extra = set(obj) - allowed
    if extra:
        raise ConfigError(f"{source}: unknown {where} keys {sorted(extra)}")


def _as_int(value, source: str, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{source}: {what} must be an integer, got {value!r}")
    return value


def load_config(path) -> RunConfig:
    """Parse and validate a config (or manifest) file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"{path}: cannot read config ({err.strerror})") from err
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}:{err.lineno}: invalid JSON: {err.msg}") from err
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    if "config" in obj and "format_version" in obj:
        obj = obj["config"]  # a manifest: replay its embedded config
        if not isinstance(obj, dict):
            raise ConfigError(f"{path}: manifest 'config' must be an object")
    source = str(path)
    _check_keys(obj, _TOP_KEYS, source, "config")

    dataset = _require(obj, "dataset", source)
    if not isinstance(dataset, dict) or "type" not in dataset:
        raise ConfigError(f"{source}: 'dataset' must be an object with a 'type'")
    if dataset["type"] == "csv":
        _check_keys(dataset, {"type", "path", "label_column"}, source, "dataset")
        _require(dataset, "path", source)
    elif dataset["type"] == "synthetic":
        _check_keys(dataset, _SYNTHETIC_KEYS | {"type"}, source, "dataset")
        for key in ("n_features", "n_informative", "n_records"):
            _require(dataset, key, source)
    else:
        raise ConfigError(
            f"{source}: dataset type must be 'csv' or 'synthetic', got {dataset['type']!r}"
        )

    try:
        costs = CostSchedule.from_config(_require(obj, "costs", source))
    except ValueError as err:
        raise ConfigError(f"{source}: {err}") from err

    threshold = _require(obj, "threshold", source)
    if not isinstance(threshold, (int, float)) or not 0.5 <= threshold < 1.0:
        raise ConfigError(
            f"{source}: threshold must be a number in [0.5, 1), got {threshold!r}"
        )

    seeds = obj.get("seeds", [0])
    if isinstance(seeds, int):
        seeds = [seeds]
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError(f"{source}: 'seeds' must be a non-empty list of integers")
    seeds = [_as_int(s, source, "seed") for s in seeds]

    ga = obj.get("ga", {})
    if not isinstance(ga, dict):
        raise ConfigError(f"{source}: 'ga' must be an object")
    _check_keys(ga, _GA_KEYS, source, "ga")

    oracle = obj.get("oracle", {})
    if not isinstance(oracle, dict):
        raise ConfigError(f"{source}: 'oracle' must be an object")
    _check_keys(oracle, {"cap"}, source, "oracle")
    cap = _as_int(oracle.get("cap", 10**6), source, "oracle cap")
    if cap < 1:
        raise ConfigError(f"{source}: oracle cap must be >= 1, got {cap}")

    recovery = obj.get("recovery", {})
    if not isinstance(recovery, dict):
        raise ConfigError(f"{source}: 'recovery' must be an object")
    _check_keys(recovery, {"front_file"}, source, "recovery")

    sweep = obj.get("sweep", {})
    if not isinstance(sweep, dict):
        raise ConfigError(f"{source}: 'sweep' must be an object")
    _check_keys(sweep, _SWEEP_KEYS, source, "sweep")
    for key, grid in sweep.items():
        if key == "max_iter":
            continue
        if not isinstance(grid, list) or not grid:
            raise ConfigError(f"{source}: sweep {key!r} must be a non-empty list")

    max_stages = obj.get("max_stages")
    if max_stages is not None:
        max_stages = _as_int(max_stages, source, "max_stages")

    cfg = RunConfig(
        source=source,
        dataset=dataset,
        costs=costs,
        threshold=float(threshold),
        split_seed=_as_int(obj.get("split_seed", 0), source, "split_seed"),
        seeds=seeds,
        max_stages=max_stages,
        ga=ga,
        oracle_cap=cap,
        recovery_front=recovery.get("front_file"),
        sweep=sweep,
    )
    try:  # surface bad GA scalars at load time, not mid-run; the probe width
        # is arbitrary and max_stages is left default because stage caps are
        # checked against the real data by each command (the exhaustive
        # enumerator accepts max_stages=1, the search itself does not).
        GaConfig(rng_seed=seeds[0], **ga).resolved(8)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{source}: invalid ga settings: {err}") from err
    return cfg


def build_dataset(cfg: RunConfig) -> CostedDataset:
    """Materialize the dataset a config describes."""
    spec = cfg.dataset
    if spec["type"] == "csv":
        path = Path(spec["path"])
        if not path.is_absolute():
            path = Path(cfg.source).parent / path
        if not path.exists():
            raise ConfigError(f"{cfg.source}: dataset file not found: {path}")
        try:
            return load_dataset(
                path,
                cfg.costs,
                cfg.split_seed,
                label_column=spec.get("label_column", "label"),
            )
        except ValueError as err:
            raise ConfigError(str(err)) from err
    fields = {k: v for k, v in spec.items() if k != "type"}
    try:
        synth = SyntheticSpec(**fields)
        X, y = generate_synthetic(synth)
        names = tuple(f"f{i}" for i in range(synth.n_features))
        return assemble_dataset(
            X, y, cfg.costs.costs_for(names), cfg.split_seed, feature_names=names
        )
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{cfg.source}: {err}") from err


def manifest_dict(cfg: RunConfig, command: str, outputs: dict, wall_time_s: float) -> dict:
    """Manifest payload: replayable config plus what a run produced."""
    return {
        "format_version": CONFIG_FORMAT_VERSION,
        "config_hash": config_hash(cfg),
        "command": command,
        "config": cfg.as_dict(),
        "outputs": outputs,
        "wall_time_s": round(wall_time_s, 3),
    }
