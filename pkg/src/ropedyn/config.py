"""Experiment configuration file: one JSON document with env / train / plan /
suite sections.  Unknown keys are rejected; referenced paths must resolve at
load time (relative to the config file)."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

from .control import PlanConfig
from .env import EnvConfig
from .harness import SuiteConfig
from .training import TrainConfig


class ConfigError(Exception):
    pass


@dataclass
class MethodRef:
    name: str
    kind: str  # model | random | nearest
    checkpoint: str | None = None
    dataset: str | None = None


@dataclass
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    plan: PlanConfig = field(default_factory=PlanConfig)
    suite: SuiteConfig = field(default_factory=SuiteConfig)
    methods: list = field(default_factory=list)
    out_dir: str = "out"
    seed: int = 0


def _build(cls, payload: dict, where: str):
    if not isinstance(payload, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(payload) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**payload)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as f:
            raw = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    top = {"env", "train", "plan", "suite", "methods", "out_dir", "seed"}
    unknown = set(raw) - top
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")

    base = os.path.dirname(os.path.abspath(path))
    cfg = ExperimentConfig(
        env=_build(EnvConfig, raw.get("env", {}), "env"),
        train=_build(TrainConfig, raw.get("train", {}), "train"),
        plan=_build(PlanConfig, raw.get("plan", {}), "plan"),
        suite=_build(SuiteConfig, raw.get("suite", {}), "suite"),
        out_dir=raw.get("out_dir", "out"),
        seed=int(raw.get("seed", 0)),
    )
    for i, m in enumerate(raw.get("methods", [])):
        ref = _build(MethodRef, m, f"methods[{i}]")
        for attr in ("checkpoint", "dataset"):
            p = getattr(ref, attr)
            if p is not None:
                resolved = p if os.path.isabs(p) else os.path.join(base, p)
                if not os.path.exists(resolved):
                    raise ConfigError(f"methods[{i}]: {attr} path not found: {p}")
                setattr(ref, attr, resolved)
        cfg.methods.append(ref)
    return cfg
