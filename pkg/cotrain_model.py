"""
协同训练模型
共享编码器 (θ_a) + 监督头 (θ_b) + 单层自监督分类头 (θ_c)

- 分割任务: 编码器 + 带跳跃连接的解码器，输出逐像素 logits
- 分类任务: 对编码器输出做全局平均池化 + 全连接
- 自监督分支从编码器第 branch_at 个下采样阶段引出，
  全局平均池化后只接一个全连接层，输出 P 或 K 个 logits
"""

import hashlib
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import torch
import torch.nn as nn
import torch.nn.functional as F

from common.config_models import SupervisedTask, TrainConfig
from common.logger import get_logger, log_message
from common.validators import CheckpointError, InvalidArgumentError

logger = get_logger("model")


class EncoderOutput(NamedTuple):
    """编码器输出"""

    features: torch.Tensor  # 最深阶段特征 (B, C, H/2^S, W/2^S)
    skips: Tuple[torch.Tensor, ...]  # 每个阶段下采样前的特征，供解码器使用
    stages: Tuple[torch.Tensor, ...]  # 每个阶段下采样后的特征


class ParamGroups(NamedTuple):
    """三组互不相交的参数"""

    theta_a: List[nn.Parameter]
    theta_b: List[nn.Parameter]
    theta_c: List[nn.Parameter]


def _conv_bn_relu(in_channels: int, out_channels: int, stride: int = 1) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_channels, out_channels, kernel_size=3, stride=stride, padding=1, bias=False),
        nn.BatchNorm2d(out_channels),
        nn.ReLU(inplace=True),
    )


class EncoderStage(nn.Module):
    """一个下采样阶段: 3×3卷积，随后步长为2的3×3卷积"""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv = _conv_bn_relu(in_channels, out_channels)
        self.down = _conv_bn_relu(out_channels, out_channels, stride=2)

    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        skip = self.conv(x)
        return skip, self.down(skip)


class Encoder(nn.Module):
    """共享特征提取器 (θ_a)"""

    def __init__(self, in_channels: int, widths: Sequence[int]):
        super().__init__()
        stages = []
        channels = in_channels
        for width in widths:
            stages.append(EncoderStage(channels, width))
            channels = width
        self.stages = nn.ModuleList(stages)
        self.widths = tuple(widths)

    def forward(self, x: torch.Tensor) -> EncoderOutput:
        skips, outputs = [], []
        for stage in self.stages:
            skip, x = stage(x)
            skips.append(skip)
            outputs.append(x)
        return EncoderOutput(features=x, skips=tuple(skips), stages=tuple(outputs))


class DecoderBlock(nn.Module):
    """上采样 + 拼接跳跃特征 + 3×3卷积"""

    def __init__(self, in_channels: int, skip_channels: int, out_channels: int):
        super().__init__()
        self.up = nn.ConvTranspose2d(in_channels, out_channels, kernel_size=2, stride=2)
        self.conv = _conv_bn_relu(out_channels + skip_channels, out_channels)

    def forward(self, x: torch.Tensor, skip: torch.Tensor) -> torch.Tensor:
        x = self.up(x)
        return self.conv(torch.cat([x, skip], dim=1))


class SegmentationHead(nn.Module):
    """带跳跃连接的解码器 (θ_b)"""

    def __init__(self, widths: Sequence[int], num_classes: int):
        super().__init__()
        blocks = []
        channels = widths[-1]
        for i in reversed(range(len(widths))):
            out_channels = widths[i - 1] if i > 0 else widths[0]
            blocks.append(DecoderBlock(channels, widths[i], out_channels))
            channels = out_channels
        self.blocks = nn.ModuleList(blocks)
        self.classifier = nn.Conv2d(channels, num_classes, kernel_size=1)

    def forward(self, encoded: EncoderOutput) -> torch.Tensor:
        x = encoded.features
        for block, skip in zip(self.blocks, reversed(encoded.skips)):
            x = block(x, skip)
        return self.classifier(x)


class ClassificationHead(nn.Module):
    """整图分类头 (θ_b)"""

    def __init__(self, in_channels: int, num_classes: int):
        super().__init__()
        self.fc = nn.Linear(in_channels, num_classes)

    def forward(self, encoded: EncoderOutput) -> torch.Tensor:
        pooled = F.adaptive_avg_pool2d(encoded.features, 1).flatten(1)
        return self.fc(pooled)


class SelfSupHead(nn.Module):
    """自监督分类头 (θ_c): 全局平均池化 + 一个全连接层"""

    def __init__(self, in_channels: int, num_classes: int):
        super().__init__()
        self.fc = nn.Linear(in_channels, num_classes)

    def forward(self, feature_map: torch.Tensor) -> torch.Tensor:
        return self.fc(F.adaptive_avg_pool2d(feature_map, 1).flatten(1))


class CotrainNet(nn.Module):
    """共享编码器的监督/自监督双分支网络"""

    def __init__(
        self,
        num_supervised_classes: int,
        num_selfsup_classes: int,
        widths: Sequence[int] = (16, 32, 64, 128),
        in_channels: int = 3,
        supervised_task: SupervisedTask = SupervisedTask.SEGMENTATION,
        branch_at: Optional[int] = None,
    ):
        super().__init__()
        self.in_channels = in_channels
        self.supervised_task = SupervisedTask(supervised_task)
        self.branch_at = branch_at or len(widths)
        if not 1 <= self.branch_at <= len(widths):
            raise InvalidArgumentError(f"branch_at={self.branch_at} 超出 [1, {len(widths)}]")

        self.encoder = Encoder(in_channels, widths)
        if self.supervised_task == SupervisedTask.SEGMENTATION:
            self.supervised_head: nn.Module = SegmentationHead(widths, num_supervised_classes)
        else:
            self.supervised_head = ClassificationHead(widths[-1], num_supervised_classes)
        self.selfsup_head = SelfSupHead(widths[self.branch_at - 1], num_selfsup_classes)
        self._init_weights()

    def _init_weights(self) -> None:
        # fan-in 缩放的随机初始化
        for module in self.modules():
            if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d)):
                nn.init.kaiming_normal_(module.weight, mode="fan_in", nonlinearity="relu")
                if module.bias is not None:
                    nn.init.zeros_(module.bias)
            elif isinstance(module, nn.BatchNorm2d):
                nn.init.ones_(module.weight)
                nn.init.zeros_(module.bias)

    @property
    def downsample_factor(self) -> int:
        return 2 ** len(self.encoder.widths)

    def _check_input(self, x: torch.Tensor) -> None:
        if x.dim() != 4:
            raise InvalidArgumentError(f"输入必须是 (B, C, H, W)，当前维度为 {tuple(x.shape)}")
        if x.shape[1] != self.in_channels:
            raise InvalidArgumentError(f"输入通道数 {x.shape[1]} 与模型 {self.in_channels} 不符")
        factor = self.downsample_factor
        if x.shape[2] % factor or x.shape[3] % factor:
            raise InvalidArgumentError(f"输入尺寸 {tuple(x.shape[2:])} 不能被 {factor} 整除")

    def encode(self, x: torch.Tensor) -> EncoderOutput:
        self._check_input(x)
        return self.encoder(x)

    def forward_supervised(self, x: torch.Tensor) -> torch.Tensor:
        """h(x | θ_a, θ_b)"""
        return self.supervised_head(self.encode(x))

    def forward_selfsup(self, gx: torch.Tensor) -> torch.Tensor:
        """h(g(x) | θ_a, θ_c)"""
        self._check_input(gx)
        x = gx
        # 只需要运行到分支阶段
        for stage in self.encoder.stages[: self.branch_at]:
            _, x = stage(x)
        return self.selfsup_head(x)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.forward_supervised(x)


def build_model(config: TrainConfig, in_channels: int = 3) -> CotrainNet:
    """按配置构建模型，使用 config.seed 固定初始化"""
    torch.manual_seed(config.seed)
    model = CotrainNet(
        num_supervised_classes=config.num_supervised_classes,
        num_selfsup_classes=config.num_selfsup_classes,
        widths=config.encoder_widths,
        in_channels=in_channels,
        supervised_task=config.supervised_task,
        branch_at=config.branch_at,
    )
    log_message(
        "模型",
        f"构建完成: {config.supervised_task.value}, 编码器宽度={config.encoder_widths}, "
        f"自监督头输出={config.num_selfsup_classes}",
        level="DEBUG",
        logger=logger,
    )
    return model


def forward_supervised(x: torch.Tensor, model: CotrainNet) -> torch.Tensor:
    """监督分支前向"""
    return model.forward_supervised(x)


def forward_selfsup(gx: torch.Tensor, model: CotrainNet) -> torch.Tensor:
    """自监督分支前向"""
    return model.forward_selfsup(gx)


# 参数组与模块的对应关系
GROUP_MODULES = {
    "theta_a": "encoder",
    "theta_b": "supervised_head",
    "theta_c": "selfsup_head",
}


def partition_params(model: CotrainNet) -> ParamGroups:
    """
    把可训练参数划分为 θ_a / θ_b / θ_c，顺序稳定

    Raises:
        InvalidArgumentError: 存在不属于任何组的参数
    """
    groups: Dict[str, List[nn.Parameter]] = {name: [] for name in GROUP_MODULES}
    prefixes = {module: group for group, module in GROUP_MODULES.items()}
    for name, param in model.named_parameters():
        if not param.requires_grad:
            continue
        group = prefixes.get(name.split(".", 1)[0])
        if group is None:
            raise InvalidArgumentError(f"参数 {name} 不属于任何参数组")
        groups[group].append(param)
    return ParamGroups(groups["theta_a"], groups["theta_b"], groups["theta_c"])


def param_checksum(params: Sequence[torch.Tensor]) -> str:
    """参数组的精确校验和（逐字节 SHA-1）"""
    digest = hashlib.sha1()
    for param in params:
        digest.update(param.detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()


def count_params(params: Sequence[torch.Tensor]) -> int:
    return sum(p.numel() for p in params)


# ==================== 检查点 ====================


def save_checkpoint(
    model: CotrainNet,
    path: Union[str, Path],
    config_hash: str,
    step: Optional[int] = None,
) -> Path:
    """保存三个命名参数组（含BN缓冲区）和配置哈希"""
    checkpoint_path = Path(path)
    checkpoint_path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        group: getattr(model, module).state_dict() for group, module in GROUP_MODULES.items()
    }
    payload["config_hash"] = config_hash
    payload["step"] = step
    torch.save(payload, checkpoint_path)
    return checkpoint_path


def load_checkpoint(
    model: CotrainNet,
    path: Union[str, Path],
    expected_hash: Optional[str] = None,
) -> Dict[str, object]:
    """
    读取检查点并校验参数组结构

    Returns:
        检查点的元信息 {config_hash, step}

    Raises:
        CheckpointError: 参数组缺失、形状不一致或配置哈希不符
    """
    checkpoint_path = Path(path)
    if not checkpoint_path.is_file():
        raise CheckpointError(f"检查点不存在: {checkpoint_path}")
    payload = torch.load(checkpoint_path, map_location="cpu", weights_only=True)

    if expected_hash is not None and payload.get("config_hash") != expected_hash:
        raise CheckpointError(
            f"配置哈希不一致: 检查点 {payload.get('config_hash')} vs 期望 {expected_hash}"
        )

    for group, module_name in GROUP_MODULES.items():
        if group not in payload:
            raise CheckpointError(f"检查点缺少参数组 {group}")
        expected = getattr(model, module_name).state_dict()
        stored = payload[group]
        if set(stored) != set(expected):
            raise CheckpointError(f"参数组 {group} 的键与模型不一致")
        for key, tensor in expected.items():
            if tuple(stored[key].shape) != tuple(tensor.shape):
                raise CheckpointError(
                    f"{group}.{key} 形状不一致: {tuple(stored[key].shape)} vs {tuple(tensor.shape)}"
                )

    for group, module_name in GROUP_MODULES.items():
        getattr(model, module_name).load_state_dict(payload[group])
    return {"config_hash": payload.get("config_hash"), "step": payload.get("step")}
