#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
配置模块单元测试
测试config.py的环境变量覆盖和训练配置模型
"""

import importlib
from pathlib import Path

import pytest

from common.config_models import (
    DatasetSpec,
    JigsawConfig,
    SelfSupSource,
    SelfSupTask,
    TrainConfig,
    config_diff,
    load_train_config,
    parse_config_text,
)
from common.validators import ConfigError


@pytest.mark.unit
class TestConfigModule:
    """配置模块测试"""

    def test_load_config_with_env_vars(self, mock_env_vars, monkeypatch):
        """测试使用环境变量加载配置"""
        import config

        try:
            importlib.reload(config)
            assert config.TRAINING_RATIO == 3
            assert config.JIGSAW_GAP == 12
            assert config.EXPERIMENT_WORKERS == 2
            assert config.DATA_WORKERS == 1
            assert config.LOG_FILE is None
            assert config.OUTPUT_DIR == Path(mock_env_vars["COTRAIN_OUTPUT_DIR"])
            assert config.OUTPUT_DIR.exists()
        finally:
            # 恢复默认值，避免影响其他测试
            monkeypatch.undo()
            importlib.reload(config)

    def test_geometry_constants(self):
        """测试图像尺寸能被分块数和下采样倍数整除"""
        import config

        assert config.IMAGE_SIZE % config.GRID_N == 0
        assert config.IMAGE_SIZE % (2 ** len(config.ENCODER_WIDTHS)) == 0
        assert config.JIGSAW_GAP < config.IMAGE_SIZE // config.GRID_N

    def test_class_names(self):
        import config

        assert set(config.CLASS_REPORT_NAMES) == {0} | set(config.SHAPE_CLASSES)
        assert config.CLASS_REPORT_NAMES[3] == "cycle"

    def test_noise_sigmas(self):
        import config

        assert config.NOISE_SIGMAS[0] == 0
        assert list(config.NOISE_SIGMAS) == sorted(config.NOISE_SIGMAS)


@pytest.mark.unit
class TestTrainConfig:
    """训练配置模型测试"""

    def test_defaults(self):
        config = TrainConfig()
        assert config.training_ratio == 6
        assert config.omega == 1.0
        assert config.num_selfsup_classes == 30
        assert config.num_supervised_classes == 4
        assert not config.is_baseline

    @pytest.mark.parametrize("value", ["baseline", "BASELINE", "inf", "none"])
    def test_baseline_sentinel(self, value):
        assert TrainConfig(training_ratio=value).is_baseline

    def test_ratio_from_string(self):
        assert TrainConfig(training_ratio="4").training_ratio == 4

    @pytest.mark.parametrize("value", [0, -2, "abc", True])
    def test_invalid_ratio(self, value):
        with pytest.raises(ValueError):
            TrainConfig(training_ratio=value)

    def test_negative_omega(self):
        with pytest.raises(ValueError):
            TrainConfig(omega=-1.0)

    def test_rotation_head_width(self):
        assert TrainConfig(selfsup_task="rotation", num_rotations=8).num_selfsup_classes == 8

    def test_widths_from_string(self):
        assert TrainConfig(encoder_widths="8, 16,16,32").encoder_widths == (8, 16, 16, 32)

    @pytest.mark.parametrize(
        "updates",
        [{"image_size": 100}, {"image_size": 48, "gap": 16}, {"branch_at": 5}, {"image_size": 24}],
    )
    def test_invalid_geometry(self, updates):
        with pytest.raises(ValueError):
            TrainConfig(**updates)

    def test_unknown_field(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rte=0.1)

    def test_config_hash(self):
        assert TrainConfig().config_hash() == TrainConfig().config_hash()
        assert TrainConfig().config_hash() != TrainConfig(seed=1).config_hash()
        assert len(TrainConfig().config_hash()) == 12

    def test_with_updates_revalidates(self):
        base = TrainConfig()
        assert base.with_updates(omega=0.5).omega == 0.5
        with pytest.raises(ValueError):
            base.with_updates(omega=-0.5)

    def test_config_diff(self):
        base = TrainConfig()
        other = base.with_updates(selfsup_source=SelfSupSource.BOTH, selfsup_task=SelfSupTask.ROTATION)
        assert config_diff(base, other) == {"selfsup_source", "selfsup_task"}
        assert config_diff(base, base) == set()

    def test_jigsaw_config(self):
        jigsaw = TrainConfig(gap=5).jigsaw_config()
        assert isinstance(jigsaw, JigsawConfig)
        assert jigsaw.gap == 5 and jigsaw.num_permutations == 30

    def test_dataset_spec_shapes(self):
        with pytest.raises(ValueError):
            DatasetSpec(min_shapes=3, max_shapes=1)


@pytest.mark.unit
class TestConfigFile:
    """配置文件读取测试"""

    def test_parse_text(self):
        values = parse_config_text("# 注释\ntraining-ratio = 3\n\nomega = 0.5  # 权重\n")
        assert values == {"training_ratio": "3", "omega": "0.5"}

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="第2行"):
            parse_config_text("omega = 1\nseed 3\n")

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="第1行"):
            parse_config_text("learning_rte = 0.1\n")

    def test_load_with_overrides(self, tmp_path):
        path = tmp_path / "train.cfg"
        path.write_text("training_ratio = baseline\nseed = 4\n", encoding="utf-8")
        config = load_train_config(path, {"seed": 7, "omega": None})
        assert config.is_baseline
        assert config.seed == 7
        assert config.omega == TrainConfig().omega

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_train_config(tmp_path / "missing.cfg")

    def test_invalid_value_wrapped(self):
        with pytest.raises(ConfigError):
            load_train_config(overrides={"training_ratio": 0})

    def test_unknown_override(self):
        with pytest.raises(ConfigError):
            load_train_config(overrides={"bogus": 1})
