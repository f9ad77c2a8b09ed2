"""Experiment configuration: YAML file plus command-line overrides.

Every key is addressable by a dotted path (``policy.tau_cluster``) so the
CLI can override any value with ``--set path=value``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .physics import CUBE_SIZE, DEFAULT_MASS
from .task_model import NoiseParams
from .world import DEFAULT_OFFSET_RANGE, REFERENCE_ACT_SIGMA, REFERENCE_OBS_SIGMA, WorldNoise

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class BlockConfig:
    dims: list = field(default_factory=lambda: [CUBE_SIZE, CUBE_SIZE, CUBE_SIZE])
    mass: float = DEFAULT_MASS


@dataclass
class WorldNoiseConfig:
    obs_mean: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    obs_sigma: list = field(default_factory=lambda: list(REFERENCE_OBS_SIGMA))
    act_mean: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    act_sigma: list = field(default_factory=lambda: list(REFERENCE_ACT_SIGMA))


@dataclass
class ModelNoiseConfig:
    sigma_z: float = 0.469
    sigma_a: float = 1.570


@dataclass
class InferenceConfig:
    n_samples: int = 50
    workers: int = 1


@dataclass
class PolicyConfig:
    grid_rows: int = 5
    grid_cols: int = 5
    tau_stable_a: float = 0.8
    tau_cluster: float = 0.2


@dataclass
class PredictionConfig:
    n_towers: int = 1000
    n_blocks: int = 3
    offset_range: float = DEFAULT_OFFSET_RANGE
    tau_stable_z: float = 0.40


@dataclass
class ActionEvalConfig:
    n_towers: int = 50
    trials: int = 10
    n_blocks: int = 2
    offset_range: float = DEFAULT_OFFSET_RANGE


@dataclass
class CharacterizeConfig:
    obs_towers: int = 250
    obs_tower_blocks: int = 3
    place_towers: int = 25
    place_attempts: int = 10
    offset_range: float = DEFAULT_OFFSET_RANGE


@dataclass
class HeatmapConfig:
    rows: int = 21
    cols: int = 21


@dataclass
class EpisodeConfig:
    steps: int = 2
    initial_blocks: int = 1
    offset_range: float = DEFAULT_OFFSET_RANGE


@dataclass
class ExperimentConfig:
    block: BlockConfig = field(default_factory=BlockConfig)
    world_noise: WorldNoiseConfig = field(default_factory=WorldNoiseConfig)
    model_noise: ModelNoiseConfig = field(default_factory=ModelNoiseConfig)
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    prediction: PredictionConfig = field(default_factory=PredictionConfig)
    action_eval: ActionEvalConfig = field(default_factory=ActionEvalConfig)
    characterize: CharacterizeConfig = field(default_factory=CharacterizeConfig)
    heatmap: HeatmapConfig = field(default_factory=HeatmapConfig)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    seed: Optional[int] = None

    def world(self) -> WorldNoise:
        wn = self.world_noise
        return WorldNoise(wn.obs_mean, wn.obs_sigma, wn.act_mean, wn.act_sigma)

    def model(self) -> NoiseParams:
        return NoiseParams(self.model_noise.sigma_z, self.model_noise.sigma_a)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> "ExperimentConfig":
        counts = {
            "inference.n_samples": self.inference.n_samples,
            "inference.workers": self.inference.workers,
            "policy.grid_rows": self.policy.grid_rows,
            "policy.grid_cols": self.policy.grid_cols,
            "prediction.n_towers": self.prediction.n_towers,
            "prediction.n_blocks": self.prediction.n_blocks,
            "action_eval.n_towers": self.action_eval.n_towers,
            "action_eval.trials": self.action_eval.trials,
            "action_eval.n_blocks": self.action_eval.n_blocks,
            "characterize.obs_towers": self.characterize.obs_towers,
            "characterize.obs_tower_blocks": self.characterize.obs_tower_blocks,
            "characterize.place_towers": self.characterize.place_towers,
            "characterize.place_attempts": self.characterize.place_attempts,
            "heatmap.rows": self.heatmap.rows,
            "heatmap.cols": self.heatmap.cols,
            "episode.steps": self.episode.steps,
            "episode.initial_blocks": self.episode.initial_blocks,
        }
        for path, v in counts.items():
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{path} must be an integer >= 1, got {v!r}")
        for path in ("policy.tau_stable_a", "policy.tau_cluster", "prediction.tau_stable_z"):
            v = get_path(self, path)
            if not isinstance(v, (int, float)) or not 0.0 <= v <= 1.0:
                raise ConfigError(f"{path} must lie in [0, 1], got {v!r}")
        for path in ("model_noise.sigma_z", "model_noise.sigma_a"):
            v = get_path(self, path)
            if not isinstance(v, (int, float)) or v < 0:
                raise ConfigError(f"{path} must be a number >= 0, got {v!r}")
        for path in ("block.dims", "world_noise.obs_mean", "world_noise.obs_sigma", "world_noise.act_mean", "world_noise.act_sigma"):
            v = get_path(self, path)
            if not isinstance(v, (list, tuple)) or len(v) != 3 or not all(isinstance(x, (int, float)) for x in v):
                raise ConfigError(f"{path} must be a list of 3 numbers, got {v!r}")
        if min(self.block.dims) <= 0 or self.block.mass <= 0:
            raise ConfigError("block dims and mass must be positive")
        if min(self.world_noise.obs_sigma) < 0 or min(self.world_noise.act_sigma) < 0:
            raise ConfigError("world noise sigmas must be >= 0")
        if self.seed is not None and (not isinstance(self.seed, int) or self.seed < 0):
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        return self


def get_path(cfg, path: str) -> Any:
    obj = cfg
    for part in path.split("."):
        obj = getattr(obj, part)
    return obj


def set_path(cfg, path: str, value: Any) -> None:
    parts = path.split(".")
    obj = cfg
    for part in parts[:-1]:
        if not dataclasses.is_dataclass(obj) or not hasattr(obj, part):
            raise ConfigError(f"unknown config key: {path}")
        obj = getattr(obj, part)
    leaf = parts[-1]
    if not dataclasses.is_dataclass(obj) or leaf not in {f.name for f in dataclasses.fields(obj)}:
        raise ConfigError(f"unknown config key: {path}")
    if dataclasses.is_dataclass(getattr(obj, leaf)):
        raise ConfigError(f"{path} is a section, not a value")
    current = getattr(obj, leaf)
    if isinstance(current, float) and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    setattr(obj, leaf, value)


def _apply(cfg, data: dict, prefix: str = "") -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"section {prefix or '<root>'} must be a mapping")
    for key, value in data.items():
        path = f"{prefix}{key}"
        target = get_path(cfg, path) if _has_path(cfg, path) else None
        if dataclasses.is_dataclass(target):
            _apply(cfg, value, path + ".")
        else:
            set_path(cfg, path, value)


def _has_path(cfg, path: str) -> bool:
    try:
        get_path(cfg, path)
    except AttributeError:
        return False
    return True


def _yaml_load(text: str, source: str) -> Any:
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        raise ConfigError(f"{where}: {exc.problem}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return data


def parse_config_text(text: str, source: str = "<string>") -> dict:
    return _yaml_load(text, source) or {}


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
        _apply(cfg, parse_config_text(text, str(p)))
    for key, value in (overrides or {}).items():
        set_path(cfg, key, value)
    return cfg.validate()


def parse_override(item: str) -> tuple[str, Any]:
    """``"policy.tau_cluster=0.1"`` -> ``("policy.tau_cluster", 0.1)``."""
    if "=" not in item:
        raise ConfigError(f"override must look like key=value, got {item!r}")
    key, raw = item.split("=", 1)
    return key.strip(), _yaml_load(raw, f"--set {key}") if raw.strip() else None
