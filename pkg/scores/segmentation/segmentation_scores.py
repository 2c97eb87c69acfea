#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
分割结果评分模块
基于混淆矩阵计算逐类 IoU、平均 IoU 和像素准确率
"""

from typing import List, Optional, Sequence

import numpy as np

from common.validators import ArgValidator, InvalidArgumentError


def confusion_matrix(pred: np.ndarray, true: np.ndarray, num_classes: int) -> np.ndarray:
    """
    计算混淆矩阵，行是真实类别，列是预测类别

    Args:
        pred: 预测掩码
        true: 真实掩码
        num_classes: 类别数（含背景）

    Returns:
        (num_classes, num_classes) int64 矩阵

    Raises:
        InvalidArgumentError: 尺寸不一致或类别越界
    """
    ArgValidator.require_same_shape(pred.shape, true.shape, context="预测掩码与真实掩码")
    ArgValidator.require_range(num_classes, 1, None, name="num_classes")
    pred = pred.astype(np.int64).ravel()
    true = true.astype(np.int64).ravel()
    if pred.size and (min(pred.min(), true.min()) < 0 or max(pred.max(), true.max()) >= num_classes):
        raise InvalidArgumentError(f"掩码取值超出 [0, {num_classes})")
    counts = np.bincount(true * num_classes + pred, minlength=num_classes * num_classes)
    return counts.reshape(num_classes, num_classes)


def iou_from_confusion(matrix: np.ndarray) -> List[Optional[float]]:
    """逐类 IoU = TP / (TP + FP + FN)，两侧都不出现的类别为 None"""
    tp = np.diag(matrix).astype(np.float64)
    union = matrix.sum(axis=0) + matrix.sum(axis=1) - tp
    return [float(tp[c] / union[c]) if union[c] > 0 else None for c in range(len(tp))]


def compute_iou(pred: np.ndarray, true: np.ndarray, num_classes: int) -> List[Optional[float]]:
    """
    逐类 IoU_c = |pred=c ∧ true=c| / |pred=c ∨ true=c|

    对交换 pred/true 对称；两侧都没有的类别返回 None，不参与平均
    """
    return iou_from_confusion(confusion_matrix(pred, true, num_classes))


def mean_iou(per_class: Sequence[Optional[float]], ignore_background: bool = True) -> Optional[float]:
    """
    逐类 IoU 的算术平均，跳过 None

    Args:
        per_class: compute_iou 的结果
        ignore_background: 是否排除第 0 类（背景）

    Returns:
        平均值，没有可用类别时为 None
    """
    start = 1 if ignore_background else 0
    values = [v for v in per_class[start:] if v is not None]
    if not values:
        return None
    return float(np.mean(values))


def pixel_accuracy(matrix: np.ndarray) -> Optional[float]:
    total = matrix.sum()
    return float(np.trace(matrix) / total) if total else None
