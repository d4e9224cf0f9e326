"""Run configuration: baked-in benchmark defaults, YAML file, ``--set`` overrides."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from toolselect.controller import SimConfig
from toolselect.dynamics import ArmParams
from toolselect.tasks import TaskKind, TaskSpec, default_task


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "out": "results",
    "jobs": 1,
    "perturbation": 0.0,
    "task": {"kind": "velocity"},
    "task_overrides": {"position": {}, "velocity": {}, "acceleration": {}},
    "sim": {
        "horizon": 5.0,
        "dt_out": 0.05,
        "x0": list(SimConfig().x0),
        "u0": [0.1, 0.1],
        "gamma": 1.0,
        "rtol": 1e-6,
        "atol": 1e-8,
        "max_steps": 2_000_000,
    },
    "tool": {"m1": None, "m2": None, "l1": None, "l2": None, "g": 9.81},
    "conf_vs_error": {"n": 300, "tasks": ["position", "velocity", "acceleration"]},
    "perturbation_study": {
        "n": 100,
        "delta_t": -0.8,
        "sweep": [-0.8, -0.4, 0.4, 0.8],
        "tasks": ["position", "velocity"],
    },
    "selection_grid": {"trials": 25, "toolset_size": 5, "task": "velocity"},
    "benchmark": {"trials": 50, "toolset_size": 10, "delta_t": -0.8, "task": "velocity"},
}

_TASK_FIELDS = {
    "theta_goal", "theta_dot_goal", "theta_ddot_goal",
    "P_theta", "P_theta_dot", "P_theta_ddot", "P_u", "eta_u",
}


def _merge(base: dict, update: dict, path: str = "") -> dict:
    for key, value in update.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and key != "task_overrides":
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} expects a mapping")
            _merge(base[key], value, where + ".")
        elif key == "task_overrides":
            if not isinstance(value, dict):
                raise ConfigError("task_overrides expects a mapping")
            for kind, overrides in value.items():
                _check_overrides(kind, overrides)
                base[key].setdefault(kind, {}).update(overrides)
        else:
            base[key] = value
    return base


def _check_overrides(kind, overrides):
    try:
        TaskKind.parse(kind)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not isinstance(overrides, dict):
        raise ConfigError(f"task_overrides.{kind} expects a mapping")
    unknown = set(overrides) - _TASK_FIELDS
    if unknown:
        raise ConfigError(f"unknown task fields {sorted(unknown)} for {kind}")


def parse_set(item: str) -> dict:
    """Turn ``a.b.c=value`` into a nested dict; the value is parsed as YAML."""
    if "=" not in item:
        raise ConfigError(f"--set expects key=value, got {item!r}")
    key, raw = item.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"empty key in --set {item!r}")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse value in --set {item!r}: {exc}") from None
    nested: dict = value
    for part in reversed(parts):
        nested = {part: nested}
    return nested


@dataclass
class RunConfig:
    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def load(cls, path: str | Path | None = None, sets=(), **top) -> "RunConfig":
        data = copy.deepcopy(DEFAULTS)
        if path is not None:
            try:
                loaded = yaml.safe_load(Path(path).read_text()) or {}
            except (OSError, yaml.YAMLError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from None
            if not isinstance(loaded, dict):
                raise ConfigError("config file must hold a mapping")
            _merge(data, loaded)
        for item in sets:
            _merge(data, parse_set(item))
        _merge(data, {k: v for k, v in top.items() if v is not None})
        cfg = cls(data)
        cfg.validate()
        return cfg

    def validate(self):
        try:
            self.sim_config()
            for kind in TaskKind:
                self.task(kind)
            TaskKind.parse(self.data["task"]["kind"])
            int(self.data["seed"])
            if int(self.data["jobs"]) < 1:
                raise ConfigError("jobs must be at least 1")
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def out(self) -> Path:
        return Path(self.data["out"])

    @property
    def jobs(self) -> int:
        return int(self.data["jobs"])

    @property
    def task_kind(self) -> TaskKind:
        return TaskKind.parse(self.data["task"]["kind"])

    def task(self, kind=None) -> TaskSpec:
        kind = TaskKind.parse(kind if kind is not None else self.data["task"]["kind"])
        overrides = self.data["task_overrides"].get(kind.value, {})
        return default_task(kind).replace(**overrides) if overrides else default_task(kind)

    def sim_config(self) -> SimConfig:
        s = self.data["sim"]
        return SimConfig(
            horizon=float(s["horizon"]),
            dt_out=float(s["dt_out"]),
            x0=tuple(s["x0"]),
            u0=tuple(s["u0"]),
            gamma=float(s["gamma"]),
            rtol=float(s["rtol"]),
            atol=float(s["atol"]),
            max_steps=int(s["max_steps"]),
        )

    def tool(self) -> ArmParams | None:
        t = self.data["tool"]
        given = [t[k] for k in ("m1", "m2", "l1", "l2")]
        if all(v is None for v in given):
            return None
        if any(v is None for v in given):
            raise ConfigError("tool needs all of m1, m2, l1, l2")
        try:
            return ArmParams(*(float(v) for v in given), g=float(t["g"]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def study(self, name: str) -> dict:
        return self.data[name]
