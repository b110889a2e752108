"""Versioned JSON run configuration shared by the CLI, server and UI.

One document carries the world, rewards, trainer and stage-plan sections
plus the seed and output directory.  Parsing is strict: unknown keys are
rejected with a field-level path so typos cannot silently fall back to
defaults.
"""

from __future__ import annotations

import dataclasses
import json
import os
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .arena import RewardWeights, WorldConfig
from .dynamics import NoiseSpec
from .errors import ConfigurationError
from .ppo import TrainerConfig
from .scheduler import StagePlan

CONFIG_VERSION = 1


@dataclass(slots=True)
class RunConfig:
    seed: int = 0
    mode: str = "ams"           # "ams" | "direct" | "cold-start"
    out_dir: str | None = None
    world: WorldConfig = field(default_factory=WorldConfig)
    rewards: RewardWeights = field(default_factory=RewardWeights)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    plan: StagePlan = field(default_factory=StagePlan)

    def validate(self) -> None:
        if self.mode not in ("ams", "direct", "cold-start"):
            raise ConfigurationError(f"mode: unknown mode {self.mode!r}")
        self.world.validate()
        self.rewards.validate()
        self.trainer.validate()
        self.plan.validate()


def _build_section(cls, doc: dict, path: str):
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in doc.items():
        if key not in known:
            raise ConfigurationError(f"{path}.{key}: unknown key")
        f = known[key]
        if f.name == "noise" and isinstance(value, dict):
            value = _build_section(NoiseSpec, value, f"{path}.noise")
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigurationError(f"{path}: {e}") from e


_SECTIONS = {
    "world": WorldConfig,
    "rewards": RewardWeights,
    "trainer": TrainerConfig,
    "plan": StagePlan,
}


def config_from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigurationError("config root must be a JSON object")
    version = doc.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigurationError(f"version: unsupported config version {version!r}")
    cfg = RunConfig()
    for key, value in doc.items():
        if key == "version":
            continue
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigurationError(f"{key}: must be an object")
            setattr(cfg, key, _build_section(_SECTIONS[key], value, key))
        elif key in ("seed", "mode", "out_dir"):
            setattr(cfg, key, value)
        else:
            raise ConfigurationError(f"{key}: unknown key")
    try:
        cfg.validate()
    except ConfigurationError:
        raise
    except Exception as e:  # invalid field contents surface with their section
        raise ConfigurationError(str(e)) from e
    return cfg


def load_config(path: str | Path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigurationError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"config {path} is not valid JSON: {e}") from e
    return config_from_dict(doc)


def config_to_dict(cfg: RunConfig) -> dict:
    doc = {
        "version": CONFIG_VERSION,
        "seed": cfg.seed,
        "mode": cfg.mode,
        "out_dir": cfg.out_dir,
        "world": dataclasses.asdict(cfg.world),
        "rewards": dataclasses.asdict(cfg.rewards),
        "trainer": dataclasses.asdict(cfg.trainer),
        "plan": dataclasses.asdict(cfg.plan),
    }
    return doc


def default_config() -> RunConfig:
    return RunConfig()


def runs_root() -> Path:
    return Path(os.environ.get("PE_RUNS_DIR", "runs"))


def write_manifest(cfg: RunConfig, out_dir: str | Path) -> Path:
    """Record everything needed to replay the run exactly."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": config_to_dict(cfg),
        "seed": cfg.seed,
        "versions": {
            "pelab": __version__,
            "python": sys.version.split()[0],
            "platform": platform.platform(),
        },
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
