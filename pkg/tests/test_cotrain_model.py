#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
协同训练模型单元测试
"""

import pytest
import torch

from common.config_models import SupervisedTask, TrainConfig
from common.validators import CheckpointError, InvalidArgumentError
from cotrain_model import (
    CotrainNet,
    build_model,
    count_params,
    forward_selfsup,
    forward_supervised,
    load_checkpoint,
    param_checksum,
    partition_params,
    save_checkpoint,
)


@pytest.fixture
def small_config():
    return TrainConfig(image_size=48, gap=4, encoder_widths=(4, 8, 8, 16), num_object_classes=4, seed=1)


@pytest.mark.unit
class TestForward:
    """前向传播测试"""

    def test_segmentation_logits_shape(self):
        """2 张 96×96 图像、4 个目标类 + 背景 -> (2, 5, 96, 96)"""
        config = TrainConfig(num_object_classes=4)
        model = build_model(config)
        out = forward_supervised(torch.zeros(2, 3, 96, 96), model)
        assert out.shape == (2, 5, 96, 96)

    def test_zero_input_finite(self, small_config):
        model = build_model(small_config)
        model.eval()
        assert torch.isfinite(model.forward_supervised(torch.zeros(2, 3, 48, 48))).all()

    def test_eval_deterministic(self, small_config):
        model = build_model(small_config)
        model.eval()
        x = torch.randn(2, 3, 48, 48)
        assert torch.equal(model(x), model(x))

    def test_selfsup_logits_shape(self, small_config):
        """4 张图像、P=30 -> (4, 30)，softmax 每行和为 1"""
        model = build_model(small_config)
        logits = forward_selfsup(torch.randn(4, 3, 48, 48), model)
        assert logits.shape == (4, 30)
        sums = torch.softmax(logits, dim=1).sum(dim=1)
        assert torch.allclose(sums, torch.ones(4), atol=1e-5)

    def test_classification_head(self, small_config):
        config = small_config.with_updates(supervised_task=SupervisedTask.CLASSIFICATION)
        model = build_model(config)
        assert model.forward_supervised(torch.randn(3, 3, 48, 48)).shape == (3, 5)

    def test_encoder_halves_each_stage(self, small_config):
        model = build_model(small_config)
        encoded = model.encode(torch.zeros(1, 3, 48, 48))
        assert [t.shape[-1] for t in encoded.stages] == [24, 12, 6, 3]

    @pytest.mark.parametrize(
        "shape",
        [(3, 48, 48), (1, 1, 48, 48), (1, 3, 40, 40)],
    )
    def test_dimension_mismatch(self, small_config, shape):
        model = build_model(small_config)
        with pytest.raises(InvalidArgumentError):
            model.forward_supervised(torch.zeros(*shape))

    def test_branch_at_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            CotrainNet(4, 30, widths=(4, 8), branch_at=3)


@pytest.mark.unit
class TestParamGroups:
    """参数组划分测试"""

    def test_selfsup_head_is_single_affine_layer(self, small_config):
        """θ_c 参数量 = (编码器宽度 + 1) × P"""
        groups = partition_params(build_model(small_config))
        assert count_params(groups.theta_c) == (16 + 1) * 30

    def test_branch_point_width(self, small_config):
        config = small_config.with_updates(branch_at=2, selfsup_task="rotation")
        groups = partition_params(build_model(config))
        assert count_params(groups.theta_c) == (8 + 1) * 4

    def test_partition_exhaustive_and_disjoint(self, small_config):
        model = build_model(small_config)
        groups = partition_params(model)
        ids = [set(map(id, group)) for group in groups]
        assert set().union(*ids) == {id(p) for p in model.parameters() if p.requires_grad}
        assert not (ids[0] & ids[1]) and not (ids[0] & ids[2]) and not (ids[1] & ids[2])

    def test_partition_stable_across_constructions(self, small_config):
        a = partition_params(build_model(small_config))
        b = partition_params(build_model(small_config))
        for group_a, group_b in zip(a, b):
            assert [p.shape for p in group_a] == [p.shape for p in group_b]
            assert param_checksum(group_a) == param_checksum(group_b)


@pytest.mark.unit
class TestCheckpoint:
    """检查点读写测试"""

    def test_round_trip(self, small_config, tmp_path):
        source = build_model(small_config)
        path = save_checkpoint(source, tmp_path / "ckpt.pt", small_config.config_hash(), step=7)

        target = build_model(small_config.with_updates(seed=99))
        meta = load_checkpoint(target, path, expected_hash=small_config.config_hash())
        assert meta == {"config_hash": small_config.config_hash(), "step": 7}
        for group_a, group_b in zip(partition_params(source), partition_params(target)):
            assert param_checksum(group_a) == param_checksum(group_b)

    def test_hash_mismatch(self, small_config, tmp_path):
        model = build_model(small_config)
        path = save_checkpoint(model, tmp_path / "ckpt.pt", "abc")
        with pytest.raises(CheckpointError):
            load_checkpoint(model, path, expected_hash="def")

    def test_shape_mismatch(self, small_config, tmp_path):
        path = save_checkpoint(build_model(small_config), tmp_path / "ckpt.pt", "abc")
        other = build_model(small_config.with_updates(num_permutations=100))
        with pytest.raises(CheckpointError):
            load_checkpoint(other, path)

    def test_missing_file(self, small_config, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(build_model(small_config), tmp_path / "missing.pt")
