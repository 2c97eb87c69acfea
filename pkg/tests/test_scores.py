#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
评分模块单元测试
"""

import numpy as np
import pandas as pd
import pytest

from common.validators import DataSourceError, InvalidArgumentError
from cotrain_model import build_model
from scores import (
    METRIC_COLUMNS,
    MetricsReport,
    compute_iou,
    confusion_matrix,
    dump_prediction_masks,
    evaluate_model,
    mean_iou,
    pixel_accuracy,
    read_metrics_csv,
    write_metrics_csv,
)


@pytest.mark.unit
class TestIoU:
    """IoU 计算测试"""

    def test_identical_masks(self):
        mask = np.array([[0, 1], [2, 1]])
        assert compute_iou(mask, mask, 3) == [1.0, 1.0, 1.0]

    def test_disjoint(self):
        pred = np.array([[1, 1], [0, 0]])
        true = np.array([[0, 0], [1, 1]])
        assert compute_iou(pred, true, 2)[1] == 0.0

    def test_half_overlap(self):
        """两个等大区域重叠一半: IoU = 1/3"""
        pred = np.array([[1, 1, 0, 0]])
        true = np.array([[0, 1, 1, 0]])
        assert compute_iou(pred, true, 2)[1] == pytest.approx(1 / 3)

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        a, b = rng.integers(0, 4, size=(2, 16, 16))
        assert compute_iou(a, b, 4) == compute_iou(b, a, 4)

    def test_absent_class_is_none(self):
        mask = np.zeros((3, 3), dtype=np.int64)
        assert compute_iou(mask, mask, 3) == [1.0, None, None]

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            compute_iou(np.zeros((2, 2)), np.zeros((2, 3)), 2)

    def test_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            compute_iou(np.full((2, 2), 3), np.zeros((2, 2)), 3)

    def test_confusion_rows_are_true_classes(self):
        matrix = confusion_matrix(np.array([1, 1]), np.array([0, 1]), 2)
        assert matrix.tolist() == [[0, 1], [0, 1]]
        assert pixel_accuracy(matrix) == 0.5


@pytest.mark.unit
class TestMeanIoU:
    """平均 IoU 测试"""

    def test_ignores_background_and_none(self):
        assert mean_iou([0.9, 0.5, None, 0.25]) == pytest.approx(0.375)

    def test_with_background(self):
        assert mean_iou([1.0, 0.0], ignore_background=False) == 0.5

    def test_nothing_valid(self):
        assert mean_iou([1.0, None]) is None


@pytest.mark.unit
class TestMetricsReport:
    """指标报告测试"""

    def _report(self):
        return MetricsReport(
            run_id="jigsaw-s0",
            step=100,
            config_hash="abc123",
            seed=0,
            per_class_iou={0: 0.9, 1: 0.5, 2: None, 3: 0.1},
            mean_iou=0.3,
            pixel_accuracy=0.8,
            pretext_accuracy=0.4,
        )

    def test_rows(self):
        rows = self._report().to_rows("compare")
        metrics = [(r["metric"], r["class"]) for r in rows]
        assert ("mean_iou", "") in metrics
        assert ("image_accuracy", "") not in metrics
        assert ("class_iou", "vehicle") in metrics
        assert ("class_iou", "person") not in metrics
        assert ("class_iou", "background") in metrics
        assert all(r["config_hash"] == "abc123" for r in rows)

    def test_metric_suffix(self):
        rows = self._report().to_rows("noise", metric_suffix="@sigma5")
        assert {r["metric"] for r in rows} == {
            "mean_iou@sigma5",
            "pixel_accuracy@sigma5",
            "pretext_accuracy@sigma5",
            "class_iou@sigma5",
        }

    def test_csv_round_trip(self, tmp_path):
        path = write_metrics_csv(self._report().to_rows("compare"), tmp_path / "m.csv")
        frame = read_metrics_csv(path)
        assert list(frame.columns) == METRIC_COLUMNS
        scalar = frame[frame["class"] == ""]
        assert set(scalar["metric"]) == {"mean_iou", "pixel_accuracy", "pretext_accuracy"}
        assert frame.loc[frame["class"] == "cycle", "value"].item() == pytest.approx(0.1)

    def test_read_missing_file(self, tmp_path):
        with pytest.raises(DataSourceError):
            read_metrics_csv(tmp_path / "missing.csv")

    def test_read_missing_columns(self, tmp_path):
        path = tmp_path / "bad.csv"
        pd.DataFrame({"run_id": ["a"], "value": [1.0]}).to_csv(path, index=False)
        with pytest.raises(DataSourceError):
            read_metrics_csv(path)


@pytest.mark.unit
class TestEvaluator:
    """评估器测试"""

    def test_segmentation_report(self, tiny_config, tiny_dataset):
        _, test = tiny_dataset
        report = evaluate_model(build_model(tiny_config), test, tiny_config, run_id="r", step=3)
        assert report.step == 3 and report.run_id == "r"
        assert report.config_hash == tiny_config.config_hash()
        assert 0.0 <= report.pixel_accuracy <= 1.0
        assert set(report.per_class_iou) == {0, 1, 2, 3}
        assert report.image_accuracy is None
        assert 0.0 <= report.pretext_accuracy <= 1.0

    def test_baseline_skips_pretext(self, tiny_config, tiny_dataset):
        config = tiny_config.with_updates(training_ratio="baseline")
        report = evaluate_model(build_model(config), tiny_dataset[1], config)
        assert report.pretext_accuracy is None

    def test_classification_report(self, tiny_config, tiny_dataset):
        config = tiny_config.with_updates(supervised_task="classification")
        report = evaluate_model(build_model(config), tiny_dataset[1], config, include_pretext=False)
        assert report.mean_iou is None
        assert 0.0 <= report.image_accuracy <= 1.0

    def test_deterministic(self, tiny_config, tiny_dataset):
        model = build_model(tiny_config)
        a = evaluate_model(model, tiny_dataset[1], tiny_config)
        b = evaluate_model(model, tiny_dataset[1], tiny_config)
        assert a.per_class_iou == b.per_class_iou
        assert a.pretext_accuracy == b.pretext_accuracy

    def test_empty_test_set(self, tiny_config):
        with pytest.raises(InvalidArgumentError):
            evaluate_model(build_model(tiny_config), [], tiny_config)

    def test_dump_masks(self, tiny_config, tiny_dataset, tmp_path):
        paths = dump_prediction_masks(build_model(tiny_config), tiny_dataset[1], tmp_path, limit=2)
        assert [p.name for p in paths] == ["pred_000.png", "pred_001.png"]
