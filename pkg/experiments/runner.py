#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
实验运行器
数据准备、单次训练运行（可在子进程中执行）、结果汇总和检查记录
"""

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from common.config_models import DatasetSpec, SupervisedTask, TrainConfig
from common.logger import get_logger, log_message
from common.validators import CotrainError
from cotrain_model import CotrainNet
from cotrainer import TrainingRun, run_cotraining, task_counts
from data_sources.corruptions import night_samples
from data_sources.image_dir import UnlabeledPool, load_image_dir
from data_sources.shapes import LabeledSample, gen_shapes_dataset
from scores.evaluator import evaluate_model
from scores.metrics_report import (
    IMAGE_ACCURACY,
    MEAN_IOU,
    METRIC_COLUMNS,
    MetricsReport,
    metrics_frame,
    write_metrics_csv,
)

logger = get_logger("experiment")

INVARIANT = "invariant"
DIRECTIONAL = "directional"

# 白天/夜间评估域
DAY, NIGHT = "day", "night"


@dataclass
class ExperimentCheck:
    """实验检查项: invariant 失败使命令返回非零，directional 只记录"""

    name: str
    kind: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class PreparedData:
    train: Tuple[LabeledSample, ...]
    test: Tuple[LabeledSample, ...]
    night_test: Tuple[LabeledSample, ...]
    night_pool: UnlabeledPool


@dataclass(frozen=True)
class RunSpec:
    """一次训练运行的完整描述，可 pickle 后交给子进程"""

    run_id: str
    preset: str
    config: TrainConfig
    dataset: DatasetSpec
    eval_domain: str = DAY
    use_night_pool: bool = False
    night_dir: Optional[str] = None


@dataclass
class RunOutcome:
    """运行结果（模型随结果返回，供噪声实验复用）"""

    spec: RunSpec
    reports: List[MetricsReport]
    steps: int
    task_counts: Dict[str, int]
    selfsup_pool_size: int
    wall_seconds: float
    model: Optional[CotrainNet] = None

    @property
    def run_id(self) -> str:
        return self.spec.run_id

    @property
    def final_report(self) -> MetricsReport:
        return self.reports[-1]


@dataclass
class ExperimentResult:
    preset: str
    frame: pd.DataFrame
    summary: pd.DataFrame
    checks: List[ExperimentCheck]
    outcomes: List[RunOutcome] = field(default_factory=list)
    files: Dict[str, Path] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """所有 invariant 检查是否通过"""
        return all(c.passed for c in self.checks if c.kind == INVARIANT)


def run_family(run_id: str) -> str:
    """去掉种子后缀: "rotation-s2" -> "rotation" """
    head, sep, tail = run_id.rpartition("-s")
    return head if sep and tail.isdigit() else run_id


# ==================== 数据准备 ====================


@lru_cache(maxsize=4)
def prepare_data(dataset: DatasetSpec, seed: int, night_dir: Optional[str] = None) -> PreparedData:
    """
    按 (规格, 种子) 准备白天训练/测试集、夜间测试集和夜间无标签图像池

    夜间图像池来自独立抽取的一组白天图像再做夜间变换，或从 night_dir 读取真实图像
    """
    train, test = gen_shapes_dataset(dataset, seed)
    night_test = night_samples(test, seed)
    if night_dir:
        pool = load_image_dir(night_dir, dataset.image_size, domain_tag=NIGHT)
    else:
        extra_spec = dataset.model_copy(update={"background_seed": dataset.background_seed + 1})
        extra_train, _ = gen_shapes_dataset(extra_spec, seed + 7919)
        pool = UnlabeledPool.from_samples(night_samples(extra_train, seed + 7919), domain_tag=NIGHT)
    return PreparedData(tuple(train), tuple(test), tuple(night_test), pool)


# ==================== 单次运行 ====================


def execute_run(spec: RunSpec, keep_model: bool = True) -> RunOutcome:
    """
    训练并在每个检查点评估一次

    Args:
        spec: 运行描述
        keep_model: 是否在结果中保留模型

    Returns:
        RunOutcome
    """
    data = prepare_data(spec.dataset, spec.config.seed, spec.night_dir)
    eval_samples = data.night_test if spec.eval_domain == NIGHT else data.test

    def evaluator(model: CotrainNet, step: int) -> MetricsReport:
        return evaluate_model(model, eval_samples, spec.config, run_id=spec.run_id, step=step)

    start = time.perf_counter()
    run: TrainingRun = run_cotraining(
        spec.config,
        data.train,
        unlabeled=data.night_pool if spec.use_night_pool else None,
        evaluator=evaluator,
        run_id=spec.run_id,
    )
    wall = time.perf_counter() - start
    counts = {choice.value: count for choice, count in task_counts(run.history).items()}
    final = run.final_metrics
    log_message(
        "实验",
        f"{spec.run_id}: 完成 {len(run.history)} 步, 用时 {wall:.1f}s, "
        f"{MEAN_IOU}={final.mean_iou if final else None}",
        logger=logger,
    )
    return RunOutcome(
        spec=spec,
        reports=[c.metrics for c in run.checkpoints],
        steps=len(run.history),
        task_counts=counts,
        selfsup_pool_size=run.selfsup_pool_size,
        wall_seconds=wall,
        model=run.model if keep_model else None,
    )


def run_many(specs: Sequence[RunSpec], workers: int = 1) -> List[RunOutcome]:
    """
    执行一组运行，workers > 1 时使用进程池；结果按 specs 顺序返回

    Raises:
        CotrainError: 任一运行失败
    """
    if workers <= 1 or len(specs) <= 1:
        return [execute_run(spec) for spec in specs]

    log_message("实验", f"使用 {workers} 个进程执行 {len(specs)} 次运行", logger=logger)
    outcomes: Dict[str, RunOutcome] = {}
    with ProcessPoolExecutor(max_workers=workers) as executor:
        future_to_spec = {executor.submit(execute_run, spec): spec for spec in specs}
        for future, spec in future_to_spec.items():
            try:
                outcomes[spec.run_id] = future.result()
            except CotrainError:
                raise
            except Exception as e:
                raise CotrainError(f"运行 {spec.run_id} 失败: {e}") from e
    return [outcomes[spec.run_id] for spec in specs]


# ==================== 汇总 ====================


def outcomes_frame(outcomes: Sequence[RunOutcome], preset: str) -> pd.DataFrame:
    """所有检查点的长表"""
    rows: List[dict] = []
    for outcome in outcomes:
        for report in outcome.reports:
            rows.extend(report.to_rows(preset))
    return metrics_frame(rows)


def final_step_frame(frame: pd.DataFrame) -> pd.DataFrame:
    """每个运行只保留最后一个检查点"""
    last = frame.groupby("run_id")["step"].transform("max")
    return frame[frame["step"] == last]


def summarize(frame: pd.DataFrame, metrics: Sequence[str] = (MEAN_IOU,)) -> pd.DataFrame:
    """
    按方法（去掉种子后缀的 run_id）汇总最后检查点的均值/最小/最大

    Returns:
        列: method,metric,class,seeds,mean,min,max
    """
    final = final_step_frame(frame)
    final = final[final["metric"].isin(metrics)]
    final = final.assign(method=final["run_id"].map(run_family))
    if final.empty:
        return pd.DataFrame(columns=["method", "metric", "class", "seeds", "mean", "min", "max"])
    grouped = final.groupby(["method", "metric", "class"], sort=False)["value"]
    summary = grouped.agg(seeds="count", mean="mean", min="min", max="max").reset_index()
    return summary


def primary_metric(config: TrainConfig) -> str:
    """方向性比较使用的指标: 分割为 mean_iou，分类为 image_accuracy"""
    return MEAN_IOU if config.supervised_task == SupervisedTask.SEGMENTATION else IMAGE_ACCURACY


def method_means(frame: pd.DataFrame, metric: str = MEAN_IOU) -> Dict[str, float]:
    summary = summarize(frame, [metric])
    return dict(zip(summary["method"], summary["mean"]))


def check_schema(frame: pd.DataFrame, outcomes: Sequence[RunOutcome], metric: str = MEAN_IOU) -> ExperimentCheck:
    """每个运行的每个检查点都有一行 metric"""
    expected = sum(len(o.reports) for o in outcomes)
    actual = int((frame["metric"] == metric).sum())
    return ExperimentCheck(
        "schema",
        INVARIANT,
        expected == actual and list(frame.columns) == METRIC_COLUMNS,
        f"{len(outcomes)} 个运行, {metric} 行 {actual}/{expected}",
    )


def check_equal_steps(outcomes: Sequence[RunOutcome]) -> ExperimentCheck:
    steps = {o.run_id: o.steps for o in outcomes}
    expected = {o.run_id: o.spec.config.total_steps for o in outcomes}
    return ExperimentCheck("equal_total_steps", INVARIANT, steps == expected and len(set(steps.values())) == 1, str(steps))


def check_not_worse(
    means: Dict[str, float], candidate: str, reference: str, tolerance: float = 0.0, name: str = ""
) -> ExperimentCheck:
    """方向性检查: candidate 均值 ≥ reference 均值 - tolerance"""
    if candidate not in means or reference not in means:
        return ExperimentCheck(name or f"{candidate}>={reference}", DIRECTIONAL, False, "缺少运行结果")
    value, base = means[candidate], means[reference]
    return ExperimentCheck(
        name or f"{candidate}>={reference}",
        DIRECTIONAL,
        bool(np.isfinite(value) and value >= base - tolerance),
        f"{candidate}={value:.4f}, {reference}={base:.4f}, 容差={tolerance}",
    )


def log_checks(preset: str, checks: Sequence[ExperimentCheck]) -> None:
    for check in checks:
        status = "通过" if check.passed else "未通过"
        level = "INFO" if check.passed or check.kind == DIRECTIONAL else "ERROR"
        log_message("实验", f"{preset} [{check.kind}] {check.name}: {status} ({check.detail})", level, logger)


def write_outputs(
    result: ExperimentResult,
    out_dir: Path,
    extra_tables: Optional[Dict[str, pd.DataFrame]] = None,
) -> Dict[str, Path]:
    """
    写出 <preset>_metrics.csv、<preset>_summary.csv、<preset>_runs.json、<preset>_checks.json
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    preset = result.preset
    files = {
        "metrics": write_metrics_csv(result.frame, out_dir / f"{preset}_metrics.csv"),
    }
    summary_path = out_dir / f"{preset}_summary.csv"
    result.summary.to_csv(summary_path, index=False)
    files["summary"] = summary_path

    runs = [
        {
            "run_id": o.run_id,
            "seed": o.spec.config.seed,
            "config_hash": o.spec.config.config_hash(),
            "config": o.spec.config.model_dump(mode="json"),
            "dataset": o.spec.dataset.model_dump(mode="json"),
            "eval_domain": o.spec.eval_domain,
            "steps": o.steps,
            "task_counts": o.task_counts,
            "selfsup_pool_size": o.selfsup_pool_size,
            "wall_seconds": round(o.wall_seconds, 3),
        }
        for o in result.outcomes
    ]
    runs_path = out_dir / f"{preset}_runs.json"
    runs_path.write_text(json.dumps(runs, ensure_ascii=False, indent=2), encoding="utf-8")
    files["runs"] = runs_path

    checks_path = out_dir / f"{preset}_checks.json"
    checks_path.write_text(
        json.dumps([asdict(c) for c in result.checks], ensure_ascii=False, indent=2), encoding="utf-8"
    )
    files["checks"] = checks_path

    for name, table in (extra_tables or {}).items():
        path = out_dir / f"{name}.csv"
        table.to_csv(path, index=False)
        files[name] = path
    result.files.update(files)
    return files
