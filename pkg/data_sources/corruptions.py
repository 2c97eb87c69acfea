"""
图像退化变换
夜间域代理变换和高斯噪声（0-255 强度尺度），均不改变图像尺寸
"""

from dataclasses import replace
from typing import List, Optional, Sequence, Union

import numpy as np

import config
from common.validators import InvalidArgumentError
from data_sources.shapes import LabeledSample

Seed = Optional[Union[int, Sequence[int]]]


def _finish(values: np.ndarray, like: np.ndarray) -> np.ndarray:
    clipped = np.clip(values, 0.0, 255.0)
    if like.dtype == np.uint8:
        return np.rint(clipped).astype(np.uint8)
    return clipped.astype(like.dtype)


def apply_night(
    image: np.ndarray,
    seed: Seed = None,
    brightness: float = config.NIGHT_BRIGHTNESS,
    noise_sigma: float = config.NIGHT_NOISE_SIGMA,
) -> np.ndarray:
    """
    夜间代理变换: 亮度乘以 brightness，再叠加 σ=noise_sigma 的传感器噪声

    噪声只加在非零像素上，全黑图像保持全黑
    """
    rng = np.random.default_rng(seed)
    values = image.astype(np.float64) * brightness
    noise = rng.normal(0.0, noise_sigma, size=image.shape)
    values = np.where(image > 0, values + noise, values)
    return _finish(values, image)


def add_gaussian_noise(image: np.ndarray, sigma: float, seed: Seed = None) -> np.ndarray:
    """
    逐像素加独立同分布的零均值高斯噪声并截断到 [0, 255]

    Raises:
        InvalidArgumentError: sigma 为负
    """
    if sigma < 0:
        raise InvalidArgumentError(f"噪声标准差不能为负: {sigma}")
    if sigma == 0:
        return image.copy()
    rng = np.random.default_rng(seed)
    return _finish(image.astype(np.float64) + rng.normal(0.0, sigma, size=image.shape), image)


def night_samples(samples: Sequence[LabeledSample], seed: int) -> List[LabeledSample]:
    """把一组白天样本转为夜间样本（掩码不变）"""
    return [
        replace(s, image=apply_night(s.image, [seed, index]), domain_tag="night")
        for index, s in enumerate(samples)
    ]


def noisy_samples(samples: Sequence[LabeledSample], sigma: float, seed: int) -> List[LabeledSample]:
    """对一组样本加高斯噪声（掩码不变）"""
    return [
        replace(s, image=add_gaussian_noise(s.image, sigma, [seed, index]))
        for index, s in enumerate(samples)
    ]
