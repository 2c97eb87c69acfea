#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
模型评估器
在测试集上计算分割/分类指标和自监督头准确率，生成 MetricsReport
"""

from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import torch
from PIL import Image

from common.config_models import SupervisedTask, TrainConfig
from common.logger import get_logger
from common.validators import ArgValidator
from cotrain_model import CotrainNet
from cotrainer import label_source_for, normalize_images, to_input_tensor
from data_sources.shapes import LabeledSample
from pretext_tasks import LabelSource, make_pretext_batch
from scores.metrics_report import MetricsReport
from scores.segmentation import confusion_matrix, iou_from_confusion, mean_iou, pixel_accuracy

logger = get_logger("eval")

EVAL_BATCH_SIZE = 32
# 自监督准确率使用的固定变换种子，与训练种子无关
PRETEXT_EVAL_SEED = 20190


def _batches(count: int, batch_size: int):
    for start in range(0, count, batch_size):
        yield slice(start, min(start + batch_size, count))


@torch.no_grad()
def predict_logits(model: CotrainNet, images: np.ndarray, batch_size: int = EVAL_BATCH_SIZE) -> List[torch.Tensor]:
    """按批计算监督分支输出，images 为 uint8 (N, H, W, C)"""
    model.eval()
    normalized = normalize_images(images)
    return [model.forward_supervised(to_input_tensor(normalized[index])) for index in _batches(len(images), batch_size)]


@torch.no_grad()
def pretext_accuracy(
    model: CotrainNet,
    images: Sequence[np.ndarray],
    config: TrainConfig,
    source: Optional[LabelSource] = None,
    seed: int = PRETEXT_EVAL_SEED,
    batch_size: int = EVAL_BATCH_SIZE,
) -> float:
    """
    自监督头在确定性变换后的图像上的准确率

    每张图像的变换种子由 (seed, 索引) 决定，不同检查点之间可比
    """
    ArgValidator.require(len(images) > 0, "评估图像不能为空")
    source = source if source is not None else label_source_for(config)
    normalized = normalize_images(np.stack(images))
    seeds = [int(s) for s in np.random.SeedSequence(seed).generate_state(len(images))]
    model.eval()
    correct = 0
    for index in _batches(len(images), batch_size):
        batch, labels = make_pretext_batch(
            list(normalized[index]),
            config.selfsup_task,
            source,
            seeds[index],
            config.jigsaw_config(),
            config.fill_value,
        )
        logits = model.forward_selfsup(to_input_tensor(batch))
        correct += int((logits.argmax(dim=1).numpy() == labels).sum())
    return correct / len(images)


def evaluate_model(
    model: CotrainNet,
    samples: Sequence[LabeledSample],
    config: TrainConfig,
    run_id: str = "run",
    step: int = 0,
    pretext_source: Optional[LabelSource] = None,
    include_pretext: Optional[bool] = None,
) -> MetricsReport:
    """
    在测试集上评估模型

    Args:
        model: 待评估模型
        samples: 测试样本
        config: 训练配置（决定任务类型和类别数）
        run_id: 运行标识
        step: 检查点步数
        pretext_source: 置换集或 K，默认按配置生成
        include_pretext: 是否评估自监督头，默认基线不评估

    Returns:
        MetricsReport，分割任务在整个测试集上累积混淆矩阵后计算 IoU
    """
    ArgValidator.require(len(samples) > 0, "测试集不能为空")
    images = np.stack([s.image for s in samples])
    report = MetricsReport(run_id=run_id, step=step, config_hash=config.config_hash(), seed=config.seed)
    num_classes = config.num_supervised_classes

    logits = predict_logits(model, images)
    if config.supervised_task == SupervisedTask.SEGMENTATION:
        preds = torch.cat([out.argmax(dim=1) for out in logits]).numpy()
        masks = np.stack([s.mask for s in samples])
        matrix = confusion_matrix(preds, masks, num_classes)
        per_class = iou_from_confusion(matrix)
        report.per_class_iou = dict(enumerate(per_class))
        report.mean_iou = mean_iou(per_class)
        report.pixel_accuracy = pixel_accuracy(matrix)
    else:
        preds = torch.cat([out.argmax(dim=1) for out in logits]).numpy()
        labels = np.array([s.class_label for s in samples])
        report.image_accuracy = float((preds == labels).mean())

    if include_pretext is None:
        include_pretext = not config.is_baseline
    if include_pretext:
        report.pretext_accuracy = pretext_accuracy(model, [s.image for s in samples], config, pretext_source)

    logger.debug(f"{run_id} step={step} mean_iou={report.mean_iou} pretext={report.pretext_accuracy}")
    return report


def dump_prediction_masks(
    model: CotrainNet,
    samples: Sequence[LabeledSample],
    out_dir: Union[str, Path],
    limit: int = 16,
) -> List[Path]:
    """
    导出预测掩码 PNG（类别值乘以 80 便于查看），文件名 pred_<索引>.png
    """
    ArgValidator.require(model.supervised_task == SupervisedTask.SEGMENTATION, "只有分割模型可以导出掩码")
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    chosen = list(samples[:limit])
    if not chosen:
        return []
    logits = predict_logits(model, np.stack([s.image for s in chosen]))
    preds = torch.cat([out.argmax(dim=1) for out in logits]).numpy().astype(np.uint8)
    paths = []
    for index, pred in enumerate(preds):
        path = directory / f"pred_{index:03d}.png"
        Image.fromarray(np.clip(pred.astype(np.int32) * 80, 0, 255).astype(np.uint8)).save(path)
        paths.append(path)
    return paths
