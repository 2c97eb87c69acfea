#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
实验绘图
所有图都只从长表 CSV 生成，可以随时用 `report` 命令重建
"""

import re
from pathlib import Path
from typing import List, Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from common.logger import get_logger, log_message  # noqa: E402
from experiments.runner import run_family  # noqa: E402
from scores.metrics_report import IMAGE_ACCURACY, MEAN_IOU, PRETEXT_ACCURACY, read_metrics_csv  # noqa: E402

logger = get_logger("plot")

SIGMA_PATTERN = re.compile(r"^(?P<metric>[a-z_]+)@sigma(?P<sigma>[0-9.]+)$")


def sigma_suffix(sigma: float) -> str:
    return f"@sigma{sigma:g}"


def noise_metric(metric: str, sigma: float) -> str:
    """噪声实验的指标名，例如 mean_iou@sigma10"""
    return metric + sigma_suffix(sigma)


def parse_noise_metric(name: str) -> Optional[tuple]:
    match = SIGMA_PATTERN.match(name)
    if not match:
        return None
    return match.group("metric"), float(match.group("sigma"))


def _band_plot(table: pd.DataFrame, x: str, ax, label: str) -> None:
    stats = table.groupby(x)["value"].agg(["mean", "min", "max"]).sort_index()
    ax.plot(stats.index, stats["mean"], marker="o", label=label)
    ax.fill_between(stats.index, stats["min"], stats["max"], alpha=0.2)


def plot_metric_vs_steps(
    frame: pd.DataFrame,
    metric: str,
    out_path: Union[str, Path],
    title: str = "",
) -> Optional[Path]:
    """
    指标随训练步数变化: 每个方法一条均值线，阴影为种子间 min/max

    Returns:
        图片路径，没有该指标时返回 None
    """
    subset = frame[(frame["metric"] == metric) & (frame["class"] == "")]
    if subset.empty:
        return None
    subset = subset.assign(method=subset["run_id"].map(run_family))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for method, table in subset.groupby("method", sort=False):
        _band_plot(table, "step", ax, str(method))
    ax.set_xlabel("training step")
    ax.set_ylabel(metric)
    ax.set_title(title or f"{metric} vs steps")
    ax.grid(alpha=0.3)
    ax.legend()
    output = Path(out_path)
    output.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(output, dpi=120)
    plt.close(fig)
    return output


def plot_noise_sweep(
    frame: pd.DataFrame,
    out_path: Union[str, Path],
    metric: str = MEAN_IOU,
) -> Optional[Path]:
    """指标随输入噪声 σ 的变化（每个模型一条线）"""
    parsed = frame["metric"].map(parse_noise_metric)
    mask = parsed.map(lambda p: p is not None and p[0] == metric) & (frame["class"] == "")
    subset = frame[mask]
    if subset.empty:
        return None
    subset = subset.assign(
        sigma=parsed[mask].map(lambda p: p[1]),
        method=subset["run_id"].map(run_family),
    )

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for method, table in subset.groupby("method", sort=False):
        _band_plot(table, "sigma", ax, str(method))
    ax.set_xlabel("input noise sigma (0-255 scale)")
    ax.set_ylabel(metric)
    ax.set_title(f"{metric} vs input noise")
    ax.grid(alpha=0.3)
    ax.legend()
    output = Path(out_path)
    output.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(output, dpi=120)
    plt.close(fig)
    return output


def plot_frame(frame: pd.DataFrame, out_dir: Union[str, Path], preset: str) -> List[Path]:
    """按实验类型生成全部图"""
    directory = Path(out_dir)
    if preset == "noise":
        candidates = [
            plot_noise_sweep(frame, directory / f"{preset}_{metric}_vs_sigma.png", metric)
            for metric in (MEAN_IOU, IMAGE_ACCURACY)
        ]
    else:
        candidates = [
            plot_metric_vs_steps(frame, metric, directory / f"{preset}_{metric}_vs_steps.png", f"{preset}: {metric}")
            for metric in (MEAN_IOU, IMAGE_ACCURACY, PRETEXT_ACCURACY)
        ]
    return [path for path in candidates if path is not None]


def regenerate_plots(csv_path: Union[str, Path], out_dir: Optional[Union[str, Path]] = None) -> List[Path]:
    """
    从指标 CSV 重建图

    Args:
        csv_path: <preset>_metrics.csv
        out_dir: 输出目录，默认与 CSV 同目录
    """
    source = Path(csv_path)
    frame = read_metrics_csv(source)
    directory = Path(out_dir) if out_dir else source.parent
    paths: List[Path] = []
    for preset, table in frame.groupby("preset", sort=False):
        paths.extend(plot_frame(table, directory, str(preset)))
    log_message("实验", f"从 {source.name} 生成 {len(paths)} 张图", logger=logger)
    return paths
