"""Run configuration: parsing, validation, merging with presets and sweep expansion."""
from __future__ import annotations

import copy
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import tomli
import tomli_w

from .diagnostics import ClassifierConfig
from .grid import Grid
from .model import ConstructionError, InitialConditionSpec, MotilitySpec, SourceSpec, Zero
from .presets import preset
from .stepper import StepConfig

SECTIONS = ("grid", "motility", "source", "initial", "step", "run", "classifier", "sweep")
DEFAULT_MAX_RUNS = 64


class ConfigError(ValueError):
    """Malformed or inadmissible configuration."""


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        # a section that switches kind starts from scratch: old parameters would not fit
        switched = isinstance(v, dict) and "kind" in v and v["kind"] != out.get(k, {}).get("kind")
        if isinstance(v, dict) and isinstance(out.get(k), dict) and not switched:
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _source_from_dict(d: dict) -> SourceSpec:
    # lam = 0 collapses log_power to the source-free model
    if d.get("kind") == "log_power" and d.get("lam", 1.0) == 0 and d.get("mu", 0.0) == 0:
        return Zero()
    return SourceSpec.from_dict(d)


def _grid_from_dict(d: dict) -> Grid:
    if "extent" in d:
        return Grid(tuple(d["extent"]), tuple(d["cells"]))
    return Grid.uniform(int(d["dim"]), float(d["length"]), int(d["cells"]))


@dataclass
class RunConfig:
    grid: Grid
    motility: MotilitySpec
    source: SourceSpec
    initial: InitialConditionSpec
    step: StepConfig
    horizon: float
    classifier: ClassifierConfig
    seed: int = 0
    compare: bool = True
    snapshot_times: tuple[float, ...] = ()
    description: str = ""
    sweep: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - set(SECTIONS) - {"description"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        for sec in ("grid", "motility", "source", "initial"):
            if sec not in d:
                raise ConfigError(f"missing [{sec}] section")
        run = dict(d.get("run", {}))
        try:
            grid = _grid_from_dict(d["grid"])
            cfg = cls(
                grid=grid,
                motility=MotilitySpec.from_dict(d["motility"]),
                source=_source_from_dict(d["source"]),
                initial=InitialConditionSpec.from_dict(d["initial"]),
                step=StepConfig(**d.get("step", {})),
                horizon=float(run.pop("horizon", 1.0)),
                classifier=ClassifierConfig(**d.get("classifier", {})),
                seed=int(run.pop("seed", 0)),
                compare=bool(run.pop("compare", True)),
                snapshot_times=tuple(float(t) for t in run.pop("snapshot_times", ())),
                description=str(d.get("description", "")),
                sweep=dict(d.get("sweep", {})),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad config entry: {exc}") from exc
        if run:
            raise ConfigError(f"unknown [run] keys: {sorted(run)}")
        if not (math.isfinite(cfg.horizon) and cfg.horizon >= 0):
            raise ConfigError("run.horizon must be a finite nonnegative number")
        if cfg.initial.kind == "gaussian_bump" and getattr(cfg.initial, "center", None) is not None:
            if len(cfg.initial.center) != grid.dim:
                raise ConfigError("initial.center must have one entry per grid axis")
        return cfg

    def to_dict(self) -> dict:
        d = {
            "grid": {"extent": list(self.grid.extent), "cells": list(self.grid.cells)},
            "motility": self.motility.to_dict(),
            "source": self.source.to_dict(),
            "initial": self.initial.to_dict(),
            "step": self.step.to_dict(),
            "run": {
                "horizon": self.horizon,
                "seed": self.seed,
                "compare": self.compare,
                "snapshot_times": list(self.snapshot_times),
            },
            "classifier": self.classifier.to_dict(),
        }
        if self.description:
            d["description"] = self.description
        if self.sweep:
            d["sweep"] = copy.deepcopy(self.sweep)
        return d

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())


def resolve(config_path: str | Path | None = None, preset_name: str | None = None) -> dict:
    """Preset (if any) overlaid with the config file (if any), as a raw nested dict."""
    if config_path is None and preset_name is None:
        raise ConfigError("give --config, --preset or both")
    raw = preset(preset_name) if preset_name else {}
    if config_path is not None:
        try:
            with open(config_path, "rb") as fh:
                raw = deep_merge(raw, tomli.load(fh))
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{config_path}: {exc}") from exc
    return raw


def load(config_path: str | Path | None = None, preset_name: str | None = None) -> RunConfig:
    try:
        return RunConfig.from_dict(resolve(config_path, preset_name))
    except ConstructionError as exc:
        raise ConfigError(str(exc)) from exc


def _set_dotted(d: dict, key: str, value) -> None:
    parts = key.split(".")
    node = d
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value


def _flatten(d: dict, prefix: str = "") -> dict:
    # unquoted dotted keys in TOML arrive as nested tables
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            out.update(_flatten(v, f"{prefix}{k}."))
        else:
            out[f"{prefix}{k}"] = v
    return out


def expand_sweep(raw: dict) -> tuple[list[str], list[tuple], list[dict]]:
    """Cartesian product over the ``[sweep]`` axes in declaration order.

    Returns the axis names, the value tuple of each point and the raw
    config of each point. ``sweep.max_runs`` caps the total.
    """
    sweep = _flatten(raw.get("sweep", {}))
    cap = int(sweep.pop("max_runs", DEFAULT_MAX_RUNS))
    axes = list(sweep)
    for name in axes:
        if "." not in name:
            raise ConfigError(f"sweep axis {name!r} must be a dotted key such as 'source.lam'")
        if not isinstance(sweep[name], list) or not sweep[name]:
            raise ConfigError(f"sweep axis {name!r} needs a non-empty list of values")
    points = list(itertools.product(*(sweep[a] for a in axes)))
    if len(points) > cap:
        raise ConfigError(f"sweep has {len(points)} runs, above the cap of {cap}")
    base = {k: v for k, v in raw.items() if k != "sweep"}
    configs = []
    for values in points:
        d = copy.deepcopy(base)
        for name, val in zip(axes, values):
            _set_dotted(d, name, val)
        configs.append(d)
    return axes, points, configs
