#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
基线与协同训练对比实验
相同步数、相同种子下训练 baseline / jigsaw / rotation 三种模型
"""

from pathlib import Path
from typing import List, Optional, Sequence

import config
from common.config_models import BASELINE, DatasetSpec, SelfSupTask, TrainConfig
from common.logger import get_logger, log_message
from experiments.plotting import plot_frame
from experiments.runner import (
    ExperimentResult,
    RunSpec,
    check_equal_steps,
    check_not_worse,
    check_schema,
    log_checks,
    method_means,
    outcomes_frame,
    primary_metric,
    run_many,
    summarize,
    write_outputs,
)
from scores.metrics_report import IMAGE_ACCURACY, MEAN_IOU, PRETEXT_ACCURACY

logger = get_logger("experiment")

PRESET = "compare"
# 方向性检查允许的差值
COMPARE_TOLERANCE = 0.005


def compare_specs(
    base: TrainConfig,
    dataset: DatasetSpec,
    seeds: Sequence[int],
    tasks: Sequence[SelfSupTask] = (SelfSupTask.JIGSAW, SelfSupTask.ROTATION),
) -> List[RunSpec]:
    """每个种子: baseline + 每种自监督任务各一个运行"""
    cotrain_ratio = base.training_ratio if not base.is_baseline else config.TRAINING_RATIO
    specs = []
    for seed in seeds:
        specs.append(
            RunSpec(f"baseline-s{seed}", PRESET, base.with_updates(training_ratio=BASELINE, seed=seed), dataset)
        )
        for task in tasks:
            run_config = base.with_updates(training_ratio=cotrain_ratio, selfsup_task=task, seed=seed)
            specs.append(RunSpec(f"{SelfSupTask(task).value}-s{seed}", PRESET, run_config, dataset))
    return specs


def run_compare(
    base: TrainConfig,
    dataset: Optional[DatasetSpec] = None,
    seeds: Sequence[int] = config.EXPERIMENT_SEEDS,
    out_dir: Optional[Path] = None,
    workers: int = config.EXPERIMENT_WORKERS,
    tasks: Sequence[SelfSupTask] = (SelfSupTask.JIGSAW, SelfSupTask.ROTATION),
) -> ExperimentResult:
    """
    对比实验: 基线 vs 拼图协同训练 vs 旋转协同训练

    Args:
        base: 基础训练配置（步数、学习率等对所有运行相同）
        dataset: 数据集规格，默认按 base.image_size 生成
        seeds: 种子列表
        out_dir: 输出目录，None 表示不写文件
        workers: 并行进程数
        tasks: 参与对比的自监督任务

    Returns:
        ExperimentResult（含长表、3 种子汇总和检查结果）
    """
    dataset = dataset or DatasetSpec(image_size=base.image_size)
    specs = compare_specs(base, dataset, seeds, tasks)
    log_message("实验", f"{PRESET}: {len(specs)} 次运行, 种子={list(seeds)}, 步数={base.total_steps}", logger=logger)
    outcomes = run_many(specs, workers)

    frame = outcomes_frame(outcomes, PRESET)
    summary = summarize(frame, [MEAN_IOU, IMAGE_ACCURACY, PRETEXT_ACCURACY])
    metric = primary_metric(base)
    means = method_means(frame, metric)
    checks = [check_schema(frame, outcomes, metric), check_equal_steps(outcomes)]
    if SelfSupTask.ROTATION in tasks:
        checks.append(
            check_not_worse(means, "rotation", "baseline", COMPARE_TOLERANCE, name="rotation_not_worse_than_baseline")
        )
    if SelfSupTask.JIGSAW in tasks:
        checks.append(
            check_not_worse(means, "jigsaw", "baseline", COMPARE_TOLERANCE, name="jigsaw_not_worse_than_baseline")
        )
    log_checks(PRESET, checks)

    result = ExperimentResult(PRESET, frame, summary, checks, outcomes)
    if out_dir is not None:
        write_outputs(result, Path(out_dir))
        for path in plot_frame(frame, Path(out_dir), PRESET):
            result.files[path.stem] = path
    return result
