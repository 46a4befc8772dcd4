"""
Engine configuration - JSON file with per-module sections
"""
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Optional

import orjson
from marshmallow import ValidationError

from app.api.schemas.config_schema import CliConfigSchema
from app.core.errors import ConfigError
from app.models.alignment import AlignConfig
from app.models.audio import FeatureConfig
from app.models.augmentation import AugmentSpec
from app.models.evaluation import StreamConfig
from app.models.network import ModelConfig
from app.models.training import TrainConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PathsConfig:
    manifest: Optional[str] = None
    checkpoint: Optional[str] = None
    metrics: Optional[str] = None
    out_dir: Optional[str] = None


@dataclass(frozen=True)
class CliConfig:
    """
    Every setting a subcommand may need

    The model input geometry is derived from the feature settings and the
    stream window, so a checkpoint trained under this config accepts the
    windows the streaming evaluator produces.
    """

    feature: FeatureConfig = field(default_factory=FeatureConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    augment: AugmentSpec = field(default_factory=AugmentSpec)
    stream: StreamConfig = field(default_factory=StreamConfig)
    align: AlignConfig = field(default_factory=AlignConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def __post_init__(self):
        frames = self.feature.frames_for(self.stream.window_samples(self.feature.sample_rate))
        object.__setattr__(self, 'model', self.model.with_input(self.feature.n_mels, frames))

    def with_seed(self, seed: Optional[int]) -> 'CliConfig':
        """Route one seed to training and augmentation"""
        if seed is None:
            return self
        return replace(
            self,
            train=replace(self.train, seed=seed),
            augment=replace(self.augment, rng_seed=seed),
        )


def _resolve(base_dir: str, path: Optional[str]) -> Optional[str]:
    if path is None or os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(base_dir, path))


def parse_config(data: dict, base_dir: str = ".") -> CliConfig:
    """
    Validate a config mapping

    Raises:
        ConfigError: Unknown key or invalid value (messages per field in payload)
    """
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    try:
        loaded = CliConfigSchema().load(data)
    except ValidationError as e:
        raise ConfigError(f"invalid config: {e.messages}", payload={'fields': e.messages})

    paths = PathsConfig(**{key: _resolve(base_dir, value) for key, value in loaded['paths'].items()})
    augment = loaded['augment']
    augment = replace(augment, rir_paths=tuple(_resolve(base_dir, p) for p in augment.rir_paths))

    try:
        return CliConfig(
            feature=loaded['feature'],
            model=loaded['model'],
            train=loaded['train'],
            augment=augment,
            stream=loaded['stream'],
            align=loaded['align'],
            paths=paths,
        )
    except ConfigError as e:
        raise ConfigError(f"invalid config: {e.message}")


def load_config(path: Optional[str] = None) -> CliConfig:
    """
    Read the engine config file; no file means all defaults

    Relative paths inside the file resolve against its directory.

    Raises:
        ConfigError: Unreadable file, bad JSON or invalid values
    """
    if path is None:
        return CliConfig()

    try:
        with open(path, 'rb') as handle:
            data = orjson.loads(handle.read())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}", payload={'path': path})
    except orjson.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}", payload={'path': path})

    cfg = parse_config(data, os.path.dirname(os.path.abspath(path)))
    logger.debug("Loaded config", extra={'path': path})
    return cfg


__all__ = ['PathsConfig', 'CliConfig', 'parse_config', 'load_config']
