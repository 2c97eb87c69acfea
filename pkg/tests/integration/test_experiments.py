#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
实验流程集成测试
用极小的模型和数据跑通 compare / domain / noise、绘图重建和命令行
"""

import json

import numpy as np
import pytest

from common.config_models import DatasetSpec, SelfSupTask, TrainConfig
from common.logger import get_logger, log_message
from cotrainer import TaskChoice, run_cotraining, run_pretext_training
from data_sources.shapes import gen_shapes_dataset
from experiments import regenerate_plots, run_compare, run_domain, run_noise
from experiments.runner import INVARIANT, run_family
from scores import evaluate_model, pretext_accuracy, read_metrics_csv

logger = get_logger("tests")


@pytest.fixture(scope="module")
def compare_result(tiny_config, tiny_dataset_spec, tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("compare")
    return run_compare(tiny_config, tiny_dataset_spec, seeds=(0,), out_dir=out_dir, workers=1), out_dir


@pytest.mark.integration
class TestCompareExperiment:
    """对比实验测试"""

    def test_run_ids_and_schema(self, compare_result):
        result, _ = compare_result
        assert [o.run_id for o in result.outcomes] == ["baseline-s0", "jigsaw-s0", "rotation-s0"]
        # 每个运行在第 6、12 步各评估一次
        mean_rows = result.frame[result.frame["metric"] == "mean_iou"]
        assert len(mean_rows) == 3 * 2
        assert set(mean_rows["step"]) == {6, 12}

    def test_invariants_pass(self, compare_result):
        result, _ = compare_result
        invariants = [c for c in result.checks if c.kind == INVARIANT]
        assert {c.name for c in invariants} == {"schema", "equal_total_steps"}
        assert result.passed

    def test_equal_steps_and_task_mix(self, compare_result):
        result, _ = compare_result
        by_id = {o.run_id: o for o in result.outcomes}
        assert all(o.steps == 12 for o in result.outcomes)
        assert by_id["baseline-s0"].task_counts["selfsup"] == 0
        assert by_id["baseline-s0"].selfsup_pool_size == 0
        assert by_id["rotation-s0"].selfsup_pool_size == 15

    def test_summary(self, compare_result):
        result, _ = compare_result
        mean = result.summary[result.summary["metric"] == "mean_iou"]
        assert set(mean["method"]) == {"baseline", "jigsaw", "rotation"}
        assert (mean["seeds"] == 1).all()
        assert "pretext_accuracy" in set(result.summary["metric"])

    def test_output_files(self, compare_result):
        result, out_dir = compare_result
        for name in ("metrics", "summary", "runs", "checks"):
            assert result.files[name].exists()
        frame = read_metrics_csv(out_dir / "compare_metrics.csv")
        assert len(frame) == len(result.frame)
        runs = json.loads((out_dir / "compare_runs.json").read_text(encoding="utf-8"))
        assert [r["run_id"] for r in runs] == ["baseline-s0", "jigsaw-s0", "rotation-s0"]
        assert runs[0]["config"]["training_ratio"] == "baseline"
        assert (out_dir / "compare_mean_iou_vs_steps.png").exists()

    def test_regenerate_plots(self, compare_result, tmp_path):
        _, out_dir = compare_result
        paths = regenerate_plots(out_dir / "compare_metrics.csv", tmp_path)
        assert {p.name for p in paths} == {
            "compare_mean_iou_vs_steps.png",
            "compare_pretext_accuracy_vs_steps.png",
        }
        assert all(p.stat().st_size > 0 for p in paths)


@pytest.mark.integration
class TestNoiseExperiment:
    """噪声实验测试"""

    def test_grid_and_sigma_zero(self, compare_result, tiny_config, tmp_path):
        compare, _ = compare_result
        result = run_noise(tiny_config, compare_result=compare, sigmas=(0, 5, 10, 15), out_dir=tmp_path)
        assert len(result.summary) == 3 * 4
        assert set(result.summary["sigma"]) == {0, 5, 10, 15}
        checks = {c.name: c for c in result.checks}
        assert checks["noise_grid_complete"].passed
        assert checks["sigma0_matches_compare"].passed
        assert result.passed
        assert (tmp_path / "noise_mean_iou_vs_sigma.png").exists()

    def test_metric_names(self, compare_result, tiny_config):
        compare, _ = compare_result
        result = run_noise(tiny_config, compare_result=compare, sigmas=(0, 10))
        assert {"mean_iou@sigma0", "mean_iou@sigma10"} <= set(result.frame["metric"])
        assert not any(m.startswith("pretext_accuracy") for m in result.frame["metric"])


@pytest.mark.integration
class TestDomainExperiment:
    """域适应实验测试"""

    def test_protocol(self, tiny_config, tiny_dataset_spec, tmp_path):
        result = run_domain(tiny_config, tiny_dataset_spec, seeds=(0,), out_dir=tmp_path, tasks=[SelfSupTask.ROTATION])
        assert [o.run_id for o in result.outcomes] == ["method1-s0", "method2-rotation-s0", "method3-rotation-s0"]
        assert all(o.spec.eval_domain == "night" for o in result.outcomes)
        assert result.passed
        pools = {run_family(o.run_id): o.selfsup_pool_size for o in result.outcomes}
        assert pools["method1"] == 0
        assert pools["method2-rotation"] == 15
        assert pools["method3-rotation"] == 30
        assert (tmp_path / "domain_metrics.csv").exists()

    def test_real_night_directory(self, tiny_config, tmp_path):
        from PIL import Image

        night_dir = tmp_path / "night"
        night_dir.mkdir()
        rng = np.random.default_rng(0)
        for index in range(4):
            Image.fromarray(rng.integers(0, 60, size=(60, 50, 3), dtype=np.uint8)).save(night_dir / f"n{index}.png")
        spec = DatasetSpec(n_samples=12, image_size=48, test_fraction=0.25)
        result = run_domain(
            tiny_config.with_updates(total_steps=4),
            spec,
            seeds=(1,),
            tasks=[SelfSupTask.JIGSAW],
            night_dir=str(night_dir),
        )
        by_id = {o.run_id: o for o in result.outcomes}
        assert by_id["method3-jigsaw-s1"].selfsup_pool_size == 9 + 4
        assert result.passed


@pytest.mark.integration
class TestCommandLine:
    """命令行测试"""

    TINY_ARGS = [
        "--total-steps", "4",
        "--eval-every", "2",
        "--image-size", "48",
        "--gap", "4",
        "--encoder-widths", "4,8,8,16",
        "--sup-batch-size", "4",
        "--selfsup-batch-size", "4",
        "--n-samples", "12",
    ]

    def test_permset_generate_and_inspect(self, tmp_path, capsys):
        from main import EXIT_OK, main

        out = tmp_path / "perm.txt"
        assert main(["--output-dir", str(tmp_path), "permset", "generate", "--n-tiles", "4", "--num-permutations", "3", "--out", str(out)]) == EXIT_OK
        assert out.read_text(encoding="utf-8").splitlines()[0] == "4 3"
        assert main(["--output-dir", str(tmp_path), "permset", "inspect", str(out)]) == EXIT_OK
        assert "min_distance" in capsys.readouterr().out

    def test_bad_permset_file(self, tmp_path):
        from main import EXIT_ERROR, main

        bad = tmp_path / "bad.txt"
        bad.write_text("3 1\n1 0 2\n", encoding="utf-8")
        assert main(["--output-dir", str(tmp_path), "permset", "inspect", str(bad)]) == EXIT_ERROR

    def test_pretext_preview(self, tmp_path):
        from main import EXIT_OK, main

        code = main(["--output-dir", str(tmp_path), "pretext", "preview", "--task", "rotation", "--count", "3", "--image-size", "48", "--gap", "4"])
        assert code == EXIT_OK
        assert len(list((tmp_path / "pretext_preview").glob("rotation_*.png"))) == 3

    def test_train(self, tmp_path):
        from main import EXIT_OK, main

        code = main(["--output-dir", str(tmp_path), "train", *self.TINY_ARGS, "--run-id", "cli", "--selfsup-task", "rotation", "--dump-masks", "2"])
        assert code == EXIT_OK
        run_dir = tmp_path / "runs" / "cli"
        assert (run_dir / "history.csv").exists()
        frame = read_metrics_csv(run_dir / "metrics.csv")
        assert set(frame["step"]) == {2, 4}
        assert len(list((run_dir / "checkpoints").glob("*.pt"))) == 2
        assert len(list((run_dir / "pred_masks").glob("pred_*.png"))) == 2

    def test_invalid_config_value(self, tmp_path):
        from main import EXIT_ERROR, main

        assert main(["--output-dir", str(tmp_path), "train", *self.TINY_ARGS, "--training-ratio", "0"]) == EXIT_ERROR

    def test_experiment_compare_and_report(self, tmp_path):
        from main import EXIT_OK, main

        code = main(["--output-dir", str(tmp_path), "experiment", "compare", *self.TINY_ARGS, "--seeds", "0", "--workers", "1"])
        assert code == EXIT_OK
        csv_path = tmp_path / "experiments" / "compare_metrics.csv"
        assert csv_path.exists()
        assert main(["--output-dir", str(tmp_path), "report", str(csv_path), "--out", str(tmp_path / "plots")]) == EXIT_OK
        assert list((tmp_path / "plots").glob("*.png"))


@pytest.mark.integration
@pytest.mark.slow
class TestPretextSignal:
    """预训练任务可学习性与计算开销"""

    @pytest.fixture(scope="class")
    def shapes(self):
        train, test = gen_shapes_dataset(DatasetSpec(n_samples=300), seed=0)
        return [s.image for s in train], [s.image for s in test]

    def test_rotation_learnable(self, shapes):
        train, test = shapes
        config = TrainConfig(selfsup_task="rotation", total_steps=2000, log_every=500, seed=0)
        model, _ = run_pretext_training(config, train)
        assert pretext_accuracy(model, test, config) >= 0.9

    def test_jigsaw_learnable(self, shapes):
        train, test = shapes
        config = TrainConfig(selfsup_task="jigsaw", total_steps=2000, log_every=500, seed=0)
        model, _ = run_pretext_training(config, train)
        # 随机猜测为 1/30
        assert pretext_accuracy(model, test, config) >= 0.5

    def test_cotrain_overhead(self):
        """R=6 协同训练 2000 步，总耗时不超过同步数基线的 1.25 倍"""
        spec = DatasetSpec(n_samples=120)
        train, test = gen_shapes_dataset(spec, seed=0)
        base = TrainConfig(total_steps=2000, eval_every=2000, log_every=500, sup_batch_size=8, selfsup_batch_size=8)
        baseline = run_cotraining(base.with_updates(training_ratio="baseline"), train)
        cotrain = run_cotraining(base.with_updates(training_ratio=6), train)
        assert sum(r.task == TaskChoice.SELFSUP for r in cotrain.history) > 0
        baseline_ms = sum(r.wall_ms for r in baseline.history)
        cotrain_ms = sum(r.wall_ms for r in cotrain.history)
        assert cotrain_ms <= 1.25 * baseline_ms
        assert evaluate_model(cotrain.model, test, cotrain.config).mean_iou is not None


FULL_SEEDS = (0, 1, 2)
FULL_CONFIG = TrainConfig(selfsup_task="rotation", total_steps=6000, eval_every=2000, log_every=1000)


@pytest.fixture(scope="module")
def full_compare(tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("full_compare")
    return run_compare(FULL_CONFIG, DatasetSpec(), seeds=FULL_SEEDS, out_dir=out_dir, workers=3), out_dir


@pytest.mark.integration
@pytest.mark.slow
class TestFullScaleExperiments:
    """3 个种子、6000 步的完整实验"""

    def test_compare_table(self, full_compare):
        result, out_dir = full_compare
        checks = {c.name: c for c in result.checks}
        rotation = checks["rotation_not_worse_than_baseline"]
        # 方向性结果只记录，不作为断言
        log_message("实验", f"旋转 vs 基线: {'通过' if rotation.passed else '未复现'} ({rotation.detail})", logger=logger)
        assert result.passed
        mean = result.summary[result.summary["metric"] == "mean_iou"]
        assert set(mean["method"]) == {"baseline", "jigsaw", "rotation"}
        assert (mean["seeds"] == 3).all()
        assert (out_dir / "compare_summary.csv").exists()

    def test_domain_method3_not_worse(self, tmp_path):
        result = run_domain(FULL_CONFIG, DatasetSpec(), seeds=FULL_SEEDS, out_dir=tmp_path, workers=3)
        checks = {c.name: c for c in result.checks}
        assert result.passed
        assert checks["method3_not_worse_than_method1[rotation]"].passed

    def test_noise_baseline_degrades(self, full_compare, tmp_path):
        compare, _ = full_compare
        result = run_noise(FULL_CONFIG, compare_result=compare, out_dir=tmp_path)
        checks = {c.name: c for c in result.checks}
        assert len(result.summary) == 3 * 4
        assert result.passed
        assert checks["baseline_non_increasing_in_sigma"].passed
