#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
输入噪声实验
用对比实验训练出的模型，在加了不同 σ 高斯噪声的测试集上评估
训练阶段不使用高斯噪声增强
"""

from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

import config
from common.config_models import DatasetSpec, TrainConfig
from common.logger import get_logger, log_message
from common.validators import CotrainError
from data_sources.corruptions import noisy_samples
from experiments.compare import run_compare
from experiments.plotting import noise_metric, plot_frame, sigma_suffix
from experiments.runner import (
    DIRECTIONAL,
    INVARIANT,
    ExperimentCheck,
    ExperimentResult,
    RunOutcome,
    log_checks,
    prepare_data,
    primary_metric,
    run_family,
    write_outputs,
)
from scores.evaluator import evaluate_model
from scores.metrics_report import metrics_frame

logger = get_logger("experiment")

PRESET = "noise"
# σ=0 与对比实验最终指标的允许误差
EXACT_TOLERANCE = 1e-9


def noise_seed(seed: int, sigma_index: int) -> int:
    return seed * 1000 + sigma_index


def evaluate_noise_grid(outcomes: Sequence[RunOutcome], sigmas: Sequence[float]) -> pd.DataFrame:
    """
    对每个模型、每个 σ 评估一次

    Raises:
        CotrainError: 结果中没有保留模型
    """
    rows: List[dict] = []
    for outcome in outcomes:
        if outcome.model is None:
            raise CotrainError(f"运行 {outcome.run_id} 没有保留模型，无法做噪声评估")
        spec = outcome.spec
        data = prepare_data(spec.dataset, spec.config.seed, spec.night_dir)
        step = outcome.final_report.step
        for index, sigma in enumerate(sigmas):
            samples = noisy_samples(data.test, sigma, noise_seed(spec.config.seed, index))
            report = evaluate_model(
                outcome.model, samples, spec.config, run_id=outcome.run_id, step=step, include_pretext=False
            )
            rows.extend(report.to_rows(PRESET, metric_suffix=sigma_suffix(sigma)))
        log_message("实验", f"{PRESET}: {outcome.run_id} 完成 {len(sigmas)} 个噪声等级", logger=logger)
    return metrics_frame(rows)


def noise_summary(frame: pd.DataFrame, metric: str, sigmas: Sequence[float]) -> pd.DataFrame:
    """
    每个模型 × 每个 σ 一行: method,sigma,seeds,mean,min,max
    """
    records = []
    families = list(dict.fromkeys(frame["run_id"].map(run_family)))
    for method in families:
        for sigma in sigmas:
            values = frame[
                (frame["metric"] == noise_metric(metric, sigma))
                & (frame["run_id"].map(run_family) == method)
                & (frame["class"] == "")
            ]["value"]
            records.append(
                {
                    "method": method,
                    "sigma": sigma,
                    "metric": metric,
                    "seeds": int(values.count()),
                    "mean": float(values.mean()) if len(values) else np.nan,
                    "min": float(values.min()) if len(values) else np.nan,
                    "max": float(values.max()) if len(values) else np.nan,
                }
            )
    return pd.DataFrame(records, columns=["method", "sigma", "metric", "seeds", "mean", "min", "max"])


def _noise_checks(
    frame: pd.DataFrame,
    summary: pd.DataFrame,
    outcomes: Sequence[RunOutcome],
    metric: str,
    sigmas: Sequence[float],
) -> List[ExperimentCheck]:
    checks = []
    expected = {(o.run_id, noise_metric(metric, s)) for o in outcomes for s in sigmas}
    present = set(zip(frame.loc[frame["class"] == "", "run_id"], frame.loc[frame["class"] == "", "metric"]))
    missing = expected - present
    checks.append(
        ExperimentCheck(
            "noise_grid_complete",
            INVARIANT,
            not missing and len(summary) == len(set(summary["method"])) * len(sigmas),
            f"{len(summary)} 行汇总, 缺少 {len(missing)} 个单元",
        )
    )

    if 0 in sigmas:
        mismatches = []
        for outcome in outcomes:
            clean = getattr(outcome.final_report, metric)
            row = frame[(frame["run_id"] == outcome.run_id) & (frame["metric"] == noise_metric(metric, 0))]
            if clean is None or row.empty or abs(float(row["value"].iloc[0]) - clean) > EXACT_TOLERANCE:
                mismatches.append(outcome.run_id)
        checks.append(
            ExperimentCheck("sigma0_matches_compare", INVARIANT, not mismatches, f"不一致: {mismatches}")
        )

    baseline = summary[summary["method"] == "baseline"].sort_values("sigma")
    means = baseline["mean"].to_numpy()
    monotone = len(means) > 0 and bool(np.all(np.diff(means) <= 0))
    checks.append(
        ExperimentCheck(
            "baseline_non_increasing_in_sigma",
            DIRECTIONAL,
            monotone,
            ", ".join(f"σ={s:g}: {m:.4f}" for s, m in zip(baseline["sigma"], means)),
        )
    )
    return checks


def run_noise(
    base: TrainConfig,
    compare_result: Optional[ExperimentResult] = None,
    dataset: Optional[DatasetSpec] = None,
    seeds: Sequence[int] = config.EXPERIMENT_SEEDS,
    sigmas: Sequence[float] = config.NOISE_SIGMAS,
    out_dir: Optional[Path] = None,
    workers: int = config.EXPERIMENT_WORKERS,
) -> ExperimentResult:
    """
    噪声实验

    Args:
        base: 基础训练配置
        compare_result: 已完成的对比实验结果（含模型），None 时先运行对比实验
        dataset: 数据集规格
        seeds: 种子列表（只在需要先运行对比实验时使用）
        sigmas: 噪声标准差列表（0-255 尺度）
        out_dir: 输出目录
        workers: 对比实验的并行进程数

    Returns:
        ExperimentResult，summary 为 模型数 × σ 个数 行
    """
    if compare_result is None:
        compare_result = run_compare(base, dataset, seeds, out_dir, workers)
    outcomes = compare_result.outcomes
    metric = primary_metric(base)

    log_message("实验", f"{PRESET}: {len(outcomes)} 个模型 × σ={list(sigmas)}", logger=logger)
    frame = evaluate_noise_grid(outcomes, sigmas)
    summary = noise_summary(frame, metric, sigmas)
    checks = _noise_checks(frame, summary, outcomes, metric, sigmas)
    log_checks(PRESET, checks)

    result = ExperimentResult(PRESET, frame, summary, checks, list(outcomes))
    if out_dir is not None:
        write_outputs(result, Path(out_dir))
        for path in plot_frame(frame, Path(out_dir), PRESET):
            result.files[path.stem] = path
    return result
