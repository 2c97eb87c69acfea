"""
配置数据模型
定义训练、预训练任务和数据集的配置结构（pydantic）
"""

import hashlib
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Set, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

import config
from common.validators import ConfigError

BASELINE = "baseline"


class SelfSupTask(str, Enum):
    """自监督预训练任务"""

    JIGSAW = "jigsaw"
    ROTATION = "rotation"


class SelfSupSource(str, Enum):
    """自监督分支的数据来源"""

    SAME = "same"  # 与监督分支相同的训练图像
    EXTRA = "extra"  # 仅额外的无标签图像池
    BOTH = "both"  # 训练图像 + 无标签图像池


class SupervisedTask(str, Enum):
    """监督任务类型"""

    SEGMENTATION = "segmentation"
    CLASSIFICATION = "classification"


class JigsawConfig(BaseModel):
    """拼图任务配置"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    grid_n: int = Field(default=config.GRID_N, ge=2, description="N×N 分块")
    # gap 是每个轴上的总留白：裁剪尺寸为 tile-G，偏移量在 [0, G] 内均匀采样
    gap: int = Field(default=config.JIGSAW_GAP, ge=0, description="随机间隙 G（像素）")
    fill_value: float = Field(default=config.FILL_VALUE, description="间隙填充值")
    num_permutations: int = Field(default=config.NUM_PERMUTATIONS, ge=1, description="置换类别数 P")


class RotationConfig(BaseModel):
    """旋转任务配置"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    num_rotations: int = Field(default=config.NUM_ROTATIONS, ge=2, description="旋转类别数 K")
    fill_value: float = Field(default=config.FILL_VALUE, description="旋转后未覆盖区域的填充值")


class DatasetSpec(BaseModel):
    """合成形状数据集规格"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_samples: int = Field(default=config.NUM_SAMPLES, ge=2)
    test_fraction: float = Field(default=config.TEST_FRACTION, gt=0.0, lt=1.0)
    image_size: int = Field(default=config.IMAGE_SIZE, ge=24)
    min_shapes: int = Field(default=1, ge=1)
    max_shapes: int = Field(default=3, ge=1)
    circle_fraction: float = Field(default=config.CIRCLE_FRACTION, ge=0.0, le=1.0)
    background_seed: int = 0
    split_seed: int = 0

    @model_validator(mode="after")
    def _check_sizes(self) -> "DatasetSpec":
        if self.max_shapes < self.min_shapes:
            raise ValueError("max_shapes 不能小于 min_shapes")
        if self.image_size % config.GRID_N != 0:
            raise ValueError(f"image_size 必须能被 {config.GRID_N} 整除")
        return self


class TrainConfig(BaseModel):
    """协同训练配置

    training_ratio 为整数 R≥1，或哨兵值 "baseline"（只训练监督任务）
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    training_ratio: Union[int, Literal["baseline"]] = config.TRAINING_RATIO
    omega: float = Field(default=config.SELFSUP_WEIGHT, ge=0.0)
    total_steps: int = Field(default=config.TOTAL_STEPS, ge=1)
    learning_rate: float = Field(default=config.LEARNING_RATE, ge=0.0)
    momentum: float = Field(default=config.MOMENTUM, ge=0.0, lt=1.0)
    sup_batch_size: int = Field(default=config.BATCH_SIZE, ge=1)
    selfsup_batch_size: int = Field(default=config.BATCH_SIZE, ge=1)
    seed: int = config.SEED
    selfsup_task: SelfSupTask = SelfSupTask.JIGSAW
    selfsup_source: SelfSupSource = SelfSupSource.SAME
    supervised_task: SupervisedTask = SupervisedTask.SEGMENTATION
    branch_at: int = Field(default=len(config.ENCODER_WIDTHS), ge=1)
    eval_every: int = Field(default=config.EVAL_EVERY, ge=1)
    log_every: int = Field(default=config.LOG_EVERY, ge=1)
    grid_n: int = Field(default=config.GRID_N, ge=2)
    gap: int = Field(default=config.JIGSAW_GAP, ge=0)
    num_permutations: int = Field(default=config.NUM_PERMUTATIONS, ge=1)
    num_rotations: int = Field(default=config.NUM_ROTATIONS, ge=2)
    fill_value: float = config.FILL_VALUE
    image_size: int = Field(default=config.IMAGE_SIZE, ge=16)
    num_object_classes: int = Field(default=config.NUM_OBJECT_CLASSES, ge=1)
    encoder_widths: Tuple[int, ...] = config.ENCODER_WIDTHS

    @field_validator("training_ratio", mode="before")
    @classmethod
    def _parse_training_ratio(cls, value: Any) -> Any:
        if isinstance(value, str):
            text = value.strip().lower()
            if text in (BASELINE, "inf", "none"):
                return BASELINE
            if text.lstrip("-").isdigit():
                value = int(text)
            else:
                raise ValueError(f"无法识别的训练比例: {value!r}")
        if isinstance(value, bool):
            raise ValueError("训练比例不能是布尔值")
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if isinstance(value, int) and value < 1:
            raise ValueError(f"训练比例必须 ≥ 1，当前为 {value}")
        return value

    @field_validator("encoder_widths", mode="before")
    @classmethod
    def _parse_widths(cls, value: Any) -> Any:
        if isinstance(value, str):
            return tuple(int(part) for part in value.replace(" ", "").split(",") if part)
        return value

    @model_validator(mode="after")
    def _check_geometry(self) -> "TrainConfig":
        if not self.encoder_widths or any(w < 1 for w in self.encoder_widths):
            raise ValueError("encoder_widths 必须是正整数序列")
        if self.branch_at > len(self.encoder_widths):
            raise ValueError(f"branch_at={self.branch_at} 超出编码器阶段数 {len(self.encoder_widths)}")
        if self.image_size % self.grid_n != 0:
            raise ValueError(f"image_size={self.image_size} 不能被 grid_n={self.grid_n} 整除")
        downsample = 2 ** len(self.encoder_widths)
        if self.image_size % downsample != 0:
            raise ValueError(f"image_size={self.image_size} 不能被 {downsample} 整除")
        if self.gap >= self.image_size // self.grid_n:
            raise ValueError(f"gap={self.gap} 必须小于块尺寸 {self.image_size // self.grid_n}")
        return self

    @property
    def is_baseline(self) -> bool:
        """是否为只训练监督任务的基线"""
        return self.training_ratio == BASELINE

    @property
    def num_selfsup_classes(self) -> int:
        """自监督分类头的输出宽度（P 或 K）"""
        if self.selfsup_task == SelfSupTask.JIGSAW:
            return self.num_permutations
        return self.num_rotations

    @property
    def num_supervised_classes(self) -> int:
        """监督头的类别数（含背景）"""
        return self.num_object_classes + 1

    def jigsaw_config(self) -> JigsawConfig:
        return JigsawConfig(
            grid_n=self.grid_n,
            gap=self.gap,
            fill_value=self.fill_value,
            num_permutations=self.num_permutations,
        )

    def config_hash(self) -> str:
        """配置哈希（规范JSON的SHA-256前12位）"""
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()[:12]

    def with_updates(self, **updates: Any) -> "TrainConfig":
        """返回应用了更新并重新验证的新配置"""
        data = self.model_dump()
        data.update(updates)
        return TrainConfig.model_validate(data)


# ==================== 配置文件读取 ====================


def parse_config_text(text: str) -> Dict[str, str]:
    """
    解析扁平的 key = value 配置文本

    Args:
        text: 配置文件内容，# 之后为注释

    Returns:
        键值字典（值保持字符串，由 pydantic 转换类型）

    Raises:
        ConfigError: 行格式错误或键未知
    """
    known = set(TrainConfig.model_fields)
    values: Dict[str, str] = {}
    for line_number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"第{line_number}行缺少 '=': {raw_line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ConfigError(f"第{line_number}行包含未知配置项: {key}")
        values[key] = value
    return values


def load_train_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> TrainConfig:
    """
    读取配置文件并应用命令行覆盖项

    Args:
        path: 配置文件路径，None 表示只使用默认值
        overrides: 覆盖项（值为 None 的项被忽略）

    Returns:
        验证后的 TrainConfig
    """
    values: Dict[str, Any] = {}
    if path is not None:
        config_path = Path(path)
        if not config_path.is_file():
            raise ConfigError(f"配置文件不存在: {config_path}")
        values.update(parse_config_text(config_path.read_text(encoding="utf-8")))

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in TrainConfig.model_fields:
            raise ConfigError(f"未知配置项: {key}")
        values[key] = value

    try:
        return TrainConfig.model_validate(values)
    except ValidationError as e:
        raise ConfigError(f"配置验证失败: {e}") from e


def config_diff(a: TrainConfig, b: TrainConfig) -> Set[str]:
    """返回两个配置中取值不同的字段名"""
    left, right = a.model_dump(), b.model_dump()
    return {key for key in left if left[key] != right[key]}
