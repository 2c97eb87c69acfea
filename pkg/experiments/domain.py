#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
域适应实验（白天 -> 夜间）

三种方法，全部在夜间测试集上评估:
- method1: 只用白天数据的基线
- method2: 协同训练，自监督分支使用白天图像
- method3: 协同训练，自监督分支使用白天图像 + 无标签夜间图像
"""

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import config
from common.config_models import BASELINE, DatasetSpec, SelfSupSource, SelfSupTask, TrainConfig, config_diff
from common.logger import get_logger, log_message
from experiments.plotting import plot_frame
from experiments.runner import (
    INVARIANT,
    NIGHT,
    ExperimentCheck,
    ExperimentResult,
    RunOutcome,
    RunSpec,
    check_equal_steps,
    check_not_worse,
    check_schema,
    log_checks,
    method_means,
    outcomes_frame,
    prepare_data,
    primary_metric,
    run_many,
    summarize,
    write_outputs,
)
from scores.metrics_report import IMAGE_ACCURACY, MEAN_IOU, PRETEXT_ACCURACY

logger = get_logger("experiment")

PRESET = "domain"


def domain_specs(
    base: TrainConfig,
    dataset: DatasetSpec,
    seeds: Sequence[int],
    tasks: Sequence[SelfSupTask],
    night_dir: Optional[str] = None,
) -> List[RunSpec]:
    """每个种子: method1 一个运行，每种自监督任务 method2/method3 各一个运行"""
    cotrain_ratio = base.training_ratio if not base.is_baseline else config.TRAINING_RATIO
    specs = []
    for seed in seeds:
        common = base.with_updates(seed=seed, selfsup_source=SelfSupSource.SAME, selfsup_task=tasks[0])
        specs.append(
            RunSpec(
                f"method1-s{seed}",
                PRESET,
                common.with_updates(training_ratio=BASELINE),
                dataset,
                eval_domain=NIGHT,
                night_dir=night_dir,
            )
        )
        for task in tasks:
            day_only = common.with_updates(training_ratio=cotrain_ratio, selfsup_task=task)
            name = SelfSupTask(task).value
            specs.append(RunSpec(f"method2-{name}-s{seed}", PRESET, day_only, dataset, NIGHT, False, night_dir))
            specs.append(
                RunSpec(
                    f"method3-{name}-s{seed}",
                    PRESET,
                    day_only.with_updates(selfsup_source=SelfSupSource.BOTH),
                    dataset,
                    NIGHT,
                    True,
                    night_dir,
                )
            )
    return specs


def _protocol_checks(
    outcomes: Sequence[RunOutcome],
    dataset: DatasetSpec,
    tasks: Sequence[SelfSupTask],
    night_dir: Optional[str],
) -> List[ExperimentCheck]:
    by_id: Dict[str, RunOutcome] = {o.run_id: o for o in outcomes}
    seeds = sorted({o.spec.config.seed for o in outcomes})
    checks = []
    for seed in seeds:
        data = prepare_data(dataset, seed, night_dir)
        method1 = by_id[f"method1-s{seed}"]
        for task in tasks:
            name = SelfSupTask(task).value
            method2 = by_id[f"method2-{name}-s{seed}"]
            method3 = by_id[f"method3-{name}-s{seed}"]

            diff23 = config_diff(method2.spec.config, method3.spec.config)
            checks.append(
                ExperimentCheck(f"config_diff_m2_m3[{name},s{seed}]", INVARIANT, diff23 == {"selfsup_source"}, str(sorted(diff23)))
            )
            allowed = {"training_ratio"} | ({"selfsup_task"} if task != tasks[0] else set())
            diff12 = config_diff(method1.spec.config, method2.spec.config)
            checks.append(
                ExperimentCheck(f"config_diff_m1_m2[{name},s{seed}]", INVARIANT, diff12 <= allowed, str(sorted(diff12)))
            )

            expected_pool = len(data.train) + len(data.night_pool)
            checks.append(
                ExperimentCheck(
                    f"method3_pool_size[{name},s{seed}]",
                    INVARIANT,
                    method3.selfsup_pool_size == expected_pool and method2.selfsup_pool_size == len(data.train),
                    f"method3={method3.selfsup_pool_size} 期望 {len(data.train)}+{len(data.night_pool)}, "
                    f"method2={method2.selfsup_pool_size}",
                )
            )
    return checks


def method_ordering(means: Dict[str, float]) -> List[Tuple[str, float]]:
    """按夜间指标从高到低排序的方法列表"""
    return sorted(means.items(), key=lambda item: item[1], reverse=True)


def run_domain(
    base: TrainConfig,
    dataset: Optional[DatasetSpec] = None,
    seeds: Sequence[int] = config.EXPERIMENT_SEEDS,
    out_dir: Optional[Path] = None,
    workers: int = config.EXPERIMENT_WORKERS,
    tasks: Optional[Sequence[SelfSupTask]] = None,
    night_dir: Optional[str] = None,
) -> ExperimentResult:
    """
    域适应实验

    Args:
        base: 基础训练配置
        dataset: 白天数据集规格
        seeds: 种子列表
        out_dir: 输出目录，None 表示不写文件
        workers: 并行进程数
        tasks: method2/method3 使用的自监督任务，默认只用 base.selfsup_task
        night_dir: 真实夜间图像目录，None 时用夜间变换合成

    Returns:
        ExperimentResult
    """
    dataset = dataset or DatasetSpec(image_size=base.image_size)
    tasks = tuple(SelfSupTask(t) for t in (tasks or (base.selfsup_task,)))
    specs = domain_specs(base, dataset, seeds, tasks, night_dir)
    log_message(
        "实验",
        f"{PRESET}: {len(specs)} 次运行, 任务={[t.value for t in tasks]}, 夜间图像={'目录 ' + night_dir if night_dir else '合成'}",
        logger=logger,
    )
    outcomes = run_many(specs, workers)

    frame = outcomes_frame(outcomes, PRESET)
    summary = summarize(frame, [MEAN_IOU, IMAGE_ACCURACY, PRETEXT_ACCURACY])
    metric = primary_metric(base)
    means = method_means(frame, metric)

    checks = [check_schema(frame, outcomes, metric), check_equal_steps(outcomes)]
    checks.extend(_protocol_checks(outcomes, dataset, tasks, night_dir))
    for task in tasks:
        checks.append(
            check_not_worse(means, f"method3-{task.value}", "method1", name=f"method3_not_worse_than_method1[{task.value}]")
        )
    ordering = ", ".join(f"{method}={value:.4f}" for method, value in method_ordering(means))
    log_message("实验", f"{PRESET}: 夜间测试 {metric} 排序: {ordering}", logger=logger)
    log_checks(PRESET, checks)

    result = ExperimentResult(PRESET, frame, summary, checks, outcomes)
    if out_dir is not None:
        write_outputs(result, Path(out_dir))
        for path in plot_frame(frame, Path(out_dir), PRESET):
            result.files[path.stem] = path
    return result
