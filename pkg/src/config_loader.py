"""
Run configuration loader.

The YAML file carries base settings, an ``environments:`` block of overrides
and an ``active.environment`` selector; the active environment's overrides are
merged over the base sections.
"""
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from config import EndpointConfig, GeneratorConfig, LoggingConfig
from .errors import ConfigError
from .prompts import Intervention
from .transcripts import DiceStyle

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config" / "config.yaml"


def load_yaml(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError(f"Configuration file not found: {path}")
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML configuration in {path}: {e}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Configuration file {path} must contain a mapping")
    return data


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class RunConfig:
    """Run configuration with environment overrides applied"""

    def __init__(self, config_path: Optional[Union[str, Path]] = None, environment: Optional[str] = None):
        self.config_path = Path(config_path) if config_path else DEFAULT_CONFIG_PATH
        raw = load_yaml(self.config_path)
        self.environment = environment or raw.get("active", {}).get("environment", "development")
        environments = raw.get("environments", {}) or {}
        if environment is not None and environment not in environments:
            raise ConfigError(f"Unknown environment '{environment}' (defined: {sorted(environments)})")
        base = {k: v for k, v in raw.items() if k not in ("environments", "active")}
        self._config = deep_merge(base, environments.get(self.environment, {}) or {})

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        config = cls.__new__(cls)
        config.config_path = None
        config.environment = "inline"
        config._config = dict(data)
        return config

    def with_endpoint_url(self, base_url: str) -> 'RunConfig':
        """Copy of this config with every configured endpoint pointed at base_url."""
        roles = self.section("endpoints")
        config = RunConfig.from_dict(deep_merge(self._config, {"endpoints": {role: {"base_url": base_url} for role in roles}}))
        config.config_path = self.config_path
        config.environment = self.environment
        return config

    def section(self, name: str) -> Dict[str, Any]:
        value = self._config.get(name, {}) or {}
        if not isinstance(value, dict):
            raise ConfigError(f"Section '{name}' must be a mapping")
        return value

    def endpoint(self, role: str) -> EndpointConfig:
        endpoints = self.section("endpoints")
        if role not in endpoints:
            raise ConfigError(f"No '{role}' endpoint configured in {self.config_path}")
        return EndpointConfig.from_dict(endpoints[role])

    @property
    def model_endpoint(self) -> EndpointConfig:
        return self.endpoint("model")

    @property
    def judge_endpoint(self) -> EndpointConfig:
        return self.endpoint("judge")

    @property
    def intervention(self) -> Intervention:
        try:
            return Intervention.parse(str(self.section("evaluation").get("intervention", "none")))
        except ValueError as e:
            raise ConfigError(str(e)) from e

    @property
    def judge_votes(self) -> int:
        votes = int(self.section("evaluation").get("judge_votes", 3))
        if votes != 3:
            raise ConfigError(f"the judging protocol uses exactly 3 votes, got {votes}")
        return votes

    @property
    def dice_style(self) -> DiceStyle:
        value = self.section("evaluation").get("dice_style", "duel")
        try:
            return DiceStyle(value)
        except ValueError:
            raise ConfigError(f"dice_style must be 'duel' or 'single', got '{value}'")

    @property
    def cache_path(self) -> Optional[Path]:
        value = self.section("evaluation").get("cache_path")
        return Path(value) if value else None

    @property
    def generator(self) -> GeneratorConfig:
        generation = self.section("generation")
        defaults = GeneratorConfig()
        try:
            return GeneratorConfig(
                master_seed=int(generation.get("master_seed", defaults.master_seed)),
                rng_algorithm=str(generation.get("rng_algorithm", defaults.rng_algorithm)),
                max_attempts=int(generation.get("max_attempts", defaults.max_attempts)),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid generation settings: {e}") from e

    @property
    def logging(self) -> LoggingConfig:
        return LoggingConfig.from_dict(self.section("logging"))

    def summary(self) -> Dict[str, Any]:
        """Configuration echo for run manifests; carries env-var names, never keys."""
        return {
            "config_path": str(self.config_path) if self.config_path else None,
            "environment": self.environment,
            "endpoints": self.section("endpoints"),
            "evaluation": self.section("evaluation"),
        }
