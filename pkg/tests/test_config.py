import json

import pytest

from src.reconstruction.config import PipelineConfig, SearchConfig, TrainConfig, build_config
from src.reconstruction.errors import ConfigurationError
from utils.validation import parse_arch, validate_activation, validate_activations, validate_resolution


def test_defaults():
    cfg = PipelineConfig()
    assert (cfg.resolution, cfg.radius, cfg.rounds, cfg.per_round, cfg.threshold) == (128, 0.9, 5, 6, 0.001)
    assert cfg.activations == ("relu", "elu", "swish")
    assert cfg.size_reward_enabled and cfg.postprocess_enabled


def test_stage_configs_follow_pipeline():
    cfg = PipelineConfig(seed=9, proxy_epochs=2, final_epochs=7, threshold=0.01, postprocess_enabled=False)
    assert cfg.search_config().proxy_epochs == 2
    assert cfg.search_config().seed == 9
    assert cfg.final_train_config().epochs == 7
    assert cfg.selection_config().threshold == 0.01
    assert not cfg.selection_config().postprocess_enabled
    assert cfg.sampling_config().seed == 9


def test_proxy_seed_offset():
    assert SearchConfig(seed=4).proxy_train_config(3).seed == 7


def test_frozen():
    with pytest.raises(Exception):
        PipelineConfig().seed = 3


def test_invalid_values():
    with pytest.raises(ConfigurationError):
        build_config(TrainConfig, epochs=-1)
    with pytest.raises(ConfigurationError):
        build_config(PipelineConfig, resolution=4)
    with pytest.raises(ConfigurationError):
        build_config(PipelineConfig, activations=("gelu",))
    with pytest.raises(ConfigurationError):
        build_config(PipelineConfig, unknown_field=1)


def test_from_file_with_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"resolution": 64, "rounds": 3, "activations": ["ReLU"]}))
    cfg = PipelineConfig.from_file(path, rounds=2, seed=None)
    assert cfg.resolution == 64
    assert cfg.rounds == 2
    assert cfg.seed == 0
    assert cfg.activations == ("relu",)


def test_from_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        PipelineConfig.from_file(tmp_path / "absent.json")


class TestValidation:
    def test_resolution(self):
        assert validate_resolution(8) == 8
        with pytest.raises(ConfigurationError, match="resolution ≥ 8"):
            validate_resolution(7)

    def test_activations(self):
        assert validate_activation(" Swish ") == "swish"
        assert validate_activations("relu,tanh,relu") == ("relu", "tanh")
        with pytest.raises(ConfigurationError, match="Invalid activation value: gelu"):
            validate_activations("relu,gelu")
        with pytest.raises(ConfigurationError):
            validate_activations(" , ")

    def test_parse_arch(self):
        assert parse_arch("default").widths == (32,) * 6
        assert parse_arch("ni", enforce_caps=False).depth == 8
        with pytest.raises(ConfigurationError):
            parse_arch("ni")
