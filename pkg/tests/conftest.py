#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
pytest配置文件
提供测试fixtures和配置
"""

import sys
from pathlib import Path

# 将项目根目录添加到Python路径
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from common.config_models import DatasetSpec, TrainConfig  # noqa: E402

# 测试用小尺寸: 48 = 3×16（可分成 3×3 块，也能被 4 级下采样整除）
TINY_IMAGE = 48


@pytest.fixture(scope="session")
def test_data_dir():
    """测试数据目录"""
    return Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def output_dir():
    """测试输出目录"""
    output = Path(__file__).parent.parent / "output" / "tests"
    output.mkdir(parents=True, exist_ok=True)
    return output


@pytest.fixture(scope="function")
def mock_env_vars(monkeypatch, tmp_path):
    """模拟环境变量"""
    env_vars = {
        "COTRAIN_OUTPUT_DIR": str(tmp_path / "env_output"),
        "COTRAIN_TRAINING_RATIO": "3",
        "COTRAIN_JIGSAW_GAP": "12",
        "COTRAIN_WORKERS": "2",
        "COTRAIN_DATA_WORKERS": "1",
        "COTRAIN_LOG_FILE": "",
    }
    for key, value in env_vars.items():
        monkeypatch.setenv(key, value)
    return env_vars


@pytest.fixture(scope="session")
def tiny_config() -> TrainConfig:
    """小模型、少步数的训练配置"""
    return TrainConfig(
        training_ratio=2,
        total_steps=12,
        eval_every=6,
        log_every=6,
        sup_batch_size=4,
        selfsup_batch_size=4,
        image_size=TINY_IMAGE,
        gap=4,
        encoder_widths=(4, 8, 8, 16),
        learning_rate=0.01,
        seed=0,
    )


@pytest.fixture(scope="session")
def tiny_dataset_spec() -> DatasetSpec:
    return DatasetSpec(n_samples=20, image_size=TINY_IMAGE, test_fraction=0.25)


@pytest.fixture(scope="session")
def tiny_dataset(tiny_dataset_spec):
    """(训练集, 测试集)"""
    from data_sources.shapes import gen_shapes_dataset

    return gen_shapes_dataset(tiny_dataset_spec, seed=0)


@pytest.fixture(scope="session")
def permset_9_30():
    from permutation_set import generate_permutation_set

    return generate_permutation_set(9, 30)


@pytest.fixture(scope="function")
def random_images():
    """生成随机 uint8 图像的工厂"""

    def _make(count: int, size: int = TINY_IMAGE, channels: int = 3, seed: int = 0):
        rng = np.random.default_rng(seed)
        return [rng.integers(0, 256, size=(size, size, channels), dtype=np.uint8) for _ in range(count)]

    return _make
