"""
Configuration settings for the hidden-rule benchmark
"""
import os
from dataclasses import dataclass, fields
from typing import Any, Dict, Optional

from src.errors import ConfigError


def _env_bool(name: str, default: bool) -> bool:
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() in ("1", "true", "yes", "on")


@dataclass
class GeneratorConfig:
    """Episode generation settings"""
    master_seed: int = 20250101
    generator_version: str = "1.0.0"
    rng_algorithm: str = "philox4x64-10"
    max_attempts: int = 5000

    @classmethod
    def from_env(cls) -> 'GeneratorConfig':
        """Create configuration from environment variables"""
        return cls(
            master_seed=int(os.getenv('RULEBENCH_MASTER_SEED', str(cls.master_seed))),
            rng_algorithm=os.getenv('RULEBENCH_RNG_ALGORITHM', cls.rng_algorithm),
            max_attempts=int(os.getenv('RULEBENCH_MAX_ATTEMPTS', str(cls.max_attempts))),
        )


@dataclass
class SimulationConfig:
    """Monte Carlo settings"""
    trials: int = 100_000
    workers: int = 1
    block_size: int = 10_000
    seed: int = 0

    @classmethod
    def from_env(cls) -> 'SimulationConfig':
        """Create configuration from environment variables"""
        return cls(
            trials=int(os.getenv('RULEBENCH_TRIALS', str(cls.trials))),
            workers=int(os.getenv('RULEBENCH_WORKERS', str(cls.workers))),
            block_size=int(os.getenv('RULEBENCH_BLOCK_SIZE', str(cls.block_size))),
            seed=int(os.getenv('RULEBENCH_SIM_SEED', str(cls.seed))),
        )


@dataclass
class EndpointConfig:
    """One chat-completion endpoint (model under test or judge)"""
    base_url: str = "http://localhost:8780"
    model_name: str = "mock-model"
    temperature: float = 0.0
    max_output_tokens: Optional[int] = None
    timeout: float = 60.0
    max_retries: int = 3
    retry_backoff: float = 1.0
    api_key_env: str = "RULEBENCH_API_KEY"
    parallelism: int = 4

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_output_tokens is not None and self.max_output_tokens <= 0:
            raise ConfigError(f"max_output_tokens must be positive, got {self.max_output_tokens}")
        if self.timeout <= 0:
            raise ConfigError(f"timeout must be positive, got {self.timeout}")
        if self.max_retries < 0:
            raise ConfigError(f"max_retries must be >= 0, got {self.max_retries}")
        if self.parallelism < 1:
            raise ConfigError(f"parallelism must be >= 1, got {self.parallelism}")

    @property
    def completions_url(self) -> str:
        return self.base_url.rstrip("/") + "/v1/chat/completions"

    def api_key(self) -> Optional[str]:
        """Read at request time; never stored on the config."""
        return os.getenv(self.api_key_env)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'EndpointConfig':
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown endpoint settings: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"invalid endpoint settings: {e}") from e

    @classmethod
    def from_env(cls) -> 'EndpointConfig':
        """Create configuration from environment variables"""
        return cls(
            base_url=os.getenv('RULEBENCH_ENDPOINT_URL', cls.base_url),
            model_name=os.getenv('RULEBENCH_MODEL', cls.model_name),
            timeout=float(os.getenv('RULEBENCH_TIMEOUT', str(cls.timeout))),
            max_retries=int(os.getenv('RULEBENCH_MAX_RETRIES', str(cls.max_retries))),
        )


@dataclass
class LoggingConfig:
    """Logging configuration settings"""
    level: str = "INFO"
    format: str = "%(message)s"
    file_path: Optional[str] = None
    max_file_size: int = 10 * 1024 * 1024  # 10MB
    backup_count: int = 5
    json: bool = False

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'LoggingConfig':
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})

    @classmethod
    def from_env(cls) -> 'LoggingConfig':
        """Create configuration from environment variables"""
        return cls(
            level=os.getenv('RULEBENCH_LOG_LEVEL', cls.level),
            file_path=os.getenv('RULEBENCH_LOG_FILE', cls.file_path),
            json=_env_bool('RULEBENCH_LOG_JSON', cls.json),
        )


# Global configuration instances
generator_config = GeneratorConfig.from_env()
simulation_config = SimulationConfig.from_env()
logging_config = LoggingConfig.from_env()
