import sys
import os
from pathlib import Path

import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from config import EndpointConfig, GeneratorConfig, LoggingConfig, SimulationConfig
from src.config_loader import RunConfig, deep_merge, load_yaml
from src.errors import ConfigError
from src.prompts import Intervention
from src.transcripts import DiceStyle


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(
        "endpoints:\n"
        "  model:\n"
        "    base_url: http://localhost:9000\n"
        "    model_name: base-model\n"
        "    max_retries: 3\n"
        "  judge:\n"
        "    model_name: base-judge\n"
        "    temperature: 0.7\n"
        "evaluation:\n"
        "  intervention: decomposition\n"
        "  dice_style: single\n"
        "generation:\n"
        "  master_seed: 7\n"
        "environments:\n"
        "  testing:\n"
        "    endpoints:\n"
        "      model:\n"
        "        max_retries: 0\n"
        "    evaluation:\n"
        "      intervention: combined\n"
        "active:\n"
        "  environment: testing\n",
        encoding="utf-8",
    )
    return path


def test_active_environment_is_merged(config_file):
    cfg = RunConfig(config_file)
    assert cfg.environment == "testing"
    model = cfg.model_endpoint
    assert model.max_retries == 0
    assert model.base_url == "http://localhost:9000"
    assert model.model_name == "base-model"
    assert cfg.intervention is Intervention.COMBINED
    assert cfg.dice_style is DiceStyle.SINGLE
    assert cfg.judge_endpoint.temperature == 0.7
    assert cfg.generator.master_seed == 7


def test_explicit_environment_and_unknown_environment(config_file):
    with pytest.raises(ConfigError):
        RunConfig(config_file, environment="staging")


def test_shipped_config_environments():
    development = RunConfig(environment="development")
    assert development.logging.level == "DEBUG"
    assert development.judge_votes == 3
    assert development.judge_endpoint.temperature == 0.7
    testing = RunConfig(environment="testing")
    assert testing.model_endpoint.retry_backoff == 0.01
    production = RunConfig(environment="production")
    assert production.model_endpoint.api_key_env == "OPENAI_API_KEY"
    assert production.logging.json
    assert "OPENAI_API_KEY" in str(production.summary()["endpoints"])


def test_deep_merge_keeps_untouched_keys():
    merged = deep_merge({"a": {"b": 1, "c": 2}, "d": 3}, {"a": {"c": 4}})
    assert merged == {"a": {"b": 1, "c": 4}, "d": 3}


def test_bad_yaml_and_missing_file(tmp_path):
    broken = tmp_path / "broken.yaml"
    broken.write_text("endpoints: [unclosed\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_yaml(broken)
    with pytest.raises(ConfigError):
        load_yaml(tmp_path / "missing.yaml")
    listing = tmp_path / "list.yaml"
    listing.write_text("- a\n- b\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_yaml(listing)
    empty = tmp_path / "empty.yaml"
    empty.write_text("", encoding="utf-8")
    assert load_yaml(empty) == {}


def test_judge_votes_must_be_three():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"evaluation": {"judge_votes": 5}}).judge_votes


def test_invalid_evaluation_values():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"evaluation": {"intervention": "cot"}}).intervention
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"evaluation": {"dice_style": "triple"}}).dice_style
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"generation": {"master_seed": "abc"}}).generator
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"endpoints": []}).section("endpoints")


def test_missing_endpoint_role():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"endpoints": {"model": {}}}).judge_endpoint


def test_defaults_without_sections():
    cfg = RunConfig.from_dict({})
    assert cfg.intervention is Intervention.NONE
    assert cfg.dice_style is DiceStyle.DUEL
    assert cfg.cache_path is None
    assert cfg.generator == GeneratorConfig()


@pytest.mark.parametrize("settings", [
    {"temperature": -0.1},
    {"max_output_tokens": 0},
    {"timeout": 0},
    {"max_retries": -1},
    {"parallelism": 0},
    {"api_key": "sk-inline"},
])
def test_endpoint_validation(settings):
    with pytest.raises(ConfigError):
        EndpointConfig.from_dict(settings)


def test_endpoint_key_is_read_from_environment(monkeypatch):
    cfg = EndpointConfig(api_key_env="RULEBENCH_TEST_KEY", base_url="http://host:1/")
    monkeypatch.delenv("RULEBENCH_TEST_KEY", raising=False)
    assert cfg.api_key() is None
    monkeypatch.setenv("RULEBENCH_TEST_KEY", "abc")
    assert cfg.api_key() == "abc"
    assert "abc" not in repr(cfg)
    assert cfg.completions_url == "http://host:1/v1/chat/completions"


def test_from_env(monkeypatch):
    monkeypatch.setenv("RULEBENCH_MASTER_SEED", "99")
    monkeypatch.setenv("RULEBENCH_TRIALS", "500")
    monkeypatch.setenv("RULEBENCH_MODEL", "other-model")
    monkeypatch.setenv("RULEBENCH_LOG_JSON", "yes")
    assert GeneratorConfig.from_env().master_seed == 99
    assert SimulationConfig.from_env().trials == 500
    assert EndpointConfig.from_env().model_name == "other-model"
    assert LoggingConfig.from_env().json


def test_logging_config_ignores_unknown_keys():
    cfg = LoggingConfig.from_dict({"level": "WARNING", "colour": True})
    assert cfg.level == "WARNING"
    assert cfg.backup_count == 5


def test_endpoint_url_override_leaves_the_original_alone(config_file):
    cfg = RunConfig(config_file)
    pointed = cfg.with_endpoint_url("http://127.0.0.1:8780")
    assert pointed.model_endpoint.base_url == "http://127.0.0.1:8780"
    assert pointed.judge_endpoint.base_url == "http://127.0.0.1:8780"
    assert pointed.model_endpoint.max_retries == 0
    assert pointed.judge_endpoint.temperature == 0.7
    assert pointed.environment == "testing"
    assert pointed.config_path == cfg.config_path
    assert cfg.model_endpoint.base_url == "http://localhost:9000"
    assert "base_url" not in cfg.section("endpoints")["judge"]
