"""
协同训练器
按训练比例 R 随机交替选择监督任务和自监督任务，实现组合目标 L = L_sup + ω·L_self

每一步只训练一个任务:
- 以 R/(R+1) 的概率选择监督任务，更新 θ_a ∪ θ_b
- 以 1/(R+1) 的概率选择自监督任务，更新 θ_a ∪ θ_c（损失乘以 ω）
"""

import time
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import torch
import torch.nn.functional as F
from torch.utils.data import DataLoader, Dataset, RandomSampler, Sampler

import config as app_config
from common.config_models import SelfSupSource, SelfSupTask, SupervisedTask, TrainConfig
from common.logger import get_logger, log_message, log_step
from common.stop_flag import StopFlag
from common.validators import ArgValidator, InvalidArgumentError, TrainingAbortedError
from cotrain_model import CotrainNet, build_model, partition_params, save_checkpoint
from data_sources.image_dir import UnlabeledPool
from data_sources.shapes import LabeledSample
from permutation_set import PermutationSet, generate_permutation_set
from pretext_tasks import LabelSource, make_pretext_sample

logger = get_logger("trainer")

# 评估回调: (模型, 步数) -> 指标报告
Evaluator = Callable[[CotrainNet, int], Any]


class TaskChoice(str, Enum):
    """每步选择的任务"""

    SUPERVISED = "supervised"
    SELFSUP = "selfsup"


@dataclass(frozen=True)
class StepResult:
    """单步训练结果"""

    step: int
    task: TaskChoice
    loss: float
    wall_ms: float


@dataclass
class CheckpointRecord:
    """周期性评估检查点"""

    step: int
    path: Optional[Path]
    metrics: Any = None


@dataclass
class TrainingRun:
    """一次训练的完整产出"""

    run_id: str
    config: TrainConfig
    model: CotrainNet
    history: List[StepResult] = field(default_factory=list)
    checkpoints: List[CheckpointRecord] = field(default_factory=list)
    selfsup_pool_size: int = 0
    stopped: bool = False

    @property
    def final_metrics(self) -> Any:
        return self.checkpoints[-1].metrics if self.checkpoints else None


# ==================== 任务调度 ====================


def sample_task(rng: np.random.Generator, training_ratio: Union[int, str]) -> TaskChoice:
    """
    按训练比例选择本步任务

    Args:
        rng: 随机数生成器（决定任务序列）
        training_ratio: R ≥ 1，或 "baseline"（始终选择监督任务）

    Returns:
        P(SUPERVISED) = R/(R+1)，P(SELFSUP) = 1/(R+1)
    """
    if training_ratio == "baseline":
        return TaskChoice.SUPERVISED
    if isinstance(training_ratio, bool) or not isinstance(training_ratio, int):
        raise InvalidArgumentError(f"训练比例必须是整数或 'baseline': {training_ratio!r}")
    if training_ratio < 1:
        raise InvalidArgumentError(f"训练比例必须 ≥ 1，当前为 {training_ratio}")
    if rng.random() < training_ratio / (training_ratio + 1):
        return TaskChoice.SUPERVISED
    return TaskChoice.SELFSUP


def expected_step_objective(
    sup_loss: float, self_loss: float, training_ratio: Union[int, str], omega: float
) -> float:
    """
    交替训练每步损失的期望: (R·ℓ_sup + ω·ℓ_self)/(R+1)，基线为 ℓ_sup
    """
    if training_ratio == "baseline":
        return sup_loss
    ratio = float(training_ratio)
    return (ratio * sup_loss + omega * self_loss) / (ratio + 1.0)


# ==================== 单步更新 ====================


def build_optimizer(model: CotrainNet, config: TrainConfig) -> torch.optim.Optimizer:
    """动量SGD，三个参数组共享同一个优化器状态"""
    groups = partition_params(model)
    return torch.optim.SGD(
        [
            {"params": groups.theta_a, "name": "theta_a"},
            {"params": groups.theta_b, "name": "theta_b"},
            {"params": groups.theta_c, "name": "theta_c"},
        ],
        lr=config.learning_rate,
        momentum=config.momentum,
    )


def _check_finite(loss: torch.Tensor, step: int, task: TaskChoice) -> None:
    if not torch.isfinite(loss):
        raise TrainingAbortedError(f"第{step}步 {task.value} 损失非有限值: {loss.item()}", step)


def supervised_step(
    batch: Tuple[torch.Tensor, torch.Tensor],
    model: CotrainNet,
    optimizer: torch.optim.Optimizer,
    step: int = 0,
) -> StepResult:
    """
    监督任务的一次更新，只有 θ_a ∪ θ_b 获得梯度

    Args:
        batch: (图像 (B, C, H, W), 目标) - 分割为 (B, H, W) 掩码，分类为 (B,) 类别
        model: 模型
        optimizer: 优化器
        step: 步数（用于记录）

    Returns:
        StepResult，loss 为更新前的交叉熵

    Raises:
        TrainingAbortedError: 损失为 NaN/Inf
    """
    start = time.perf_counter()
    images, targets = batch
    model.train()
    # set_to_none 保证未参与的参数组没有梯度，动量也不会推动它们
    optimizer.zero_grad(set_to_none=True)
    logits = model.forward_supervised(images)
    loss = F.cross_entropy(logits, targets)
    _check_finite(loss, step, TaskChoice.SUPERVISED)
    loss.backward()
    optimizer.step()
    wall_ms = (time.perf_counter() - start) * 1000.0
    return StepResult(step=step, task=TaskChoice.SUPERVISED, loss=float(loss.item()), wall_ms=wall_ms)


def selfsup_step(
    batch: Tuple[torch.Tensor, torch.Tensor],
    model: CotrainNet,
    optimizer: torch.optim.Optimizer,
    omega: float,
    step: int = 0,
) -> StepResult:
    """
    自监督任务的一次更新，最小化 ω·CE，只有 θ_a ∪ θ_c 获得梯度

    ω = 0 时梯度恒为零，直接跳过优化器更新
    """
    ArgValidator.require_range(omega, 0.0, None, name="omega")
    start = time.perf_counter()
    images, labels = batch
    model.train()
    optimizer.zero_grad(set_to_none=True)
    logits = model.forward_selfsup(images)
    loss = omega * F.cross_entropy(logits, labels)
    _check_finite(loss, step, TaskChoice.SELFSUP)
    if omega > 0:
        loss.backward()
        optimizer.step()
    wall_ms = (time.perf_counter() - start) * 1000.0
    return StepResult(step=step, task=TaskChoice.SELFSUP, loss=float(loss.item()), wall_ms=wall_ms)


# ==================== 数据准备 ====================


def normalize_images(images: np.ndarray) -> np.ndarray:
    """uint8 [0,255] -> float32 [-1,1]，均值约为 0"""
    return (images.astype(np.float32) / 127.5) - 1.0


def to_input_tensor(images: np.ndarray) -> torch.Tensor:
    """(B, H, W, C) 数组 -> (B, C, H, W) 张量"""
    if images.ndim == 3:
        images = images[..., None]
    return torch.from_numpy(np.ascontiguousarray(images.transpose(0, 3, 1, 2)))


@lru_cache(maxsize=8)
def cached_permutation_set(n_tiles: int, num_permutations: int) -> PermutationSet:
    """同一进程内复用置换集（生成需要枚举 n_tiles! 个候选）"""
    return generate_permutation_set(n_tiles, num_permutations)


def label_source_for(config: TrainConfig) -> LabelSource:
    """按配置返回置换集或旋转类别数"""
    if config.selfsup_task == SelfSupTask.JIGSAW:
        return cached_permutation_set(config.grid_n**2, config.num_permutations)
    return config.num_rotations


class SupervisedDataset(Dataset):
    """带标签样本集: 索引 -> (图像张量 (C, H, W), 掩码或类别)"""

    def __init__(self, samples: Sequence[LabeledSample], task: SupervisedTask):
        if len(samples) == 0:
            raise InvalidArgumentError("监督数据集不能为空")
        self.images = to_input_tensor(normalize_images(np.stack([s.image for s in samples])))
        if task == SupervisedTask.SEGMENTATION:
            self.targets = torch.from_numpy(np.stack([s.mask for s in samples]).astype(np.int64))
        else:
            self.targets = torch.tensor([s.class_label for s in samples], dtype=torch.int64)

    @property
    def in_channels(self) -> int:
        return int(self.images.shape[1])

    def __len__(self) -> int:
        return len(self.images)

    def __getitem__(self, index: int) -> Tuple[torch.Tensor, torch.Tensor]:
        return self.images[index], self.targets[index]


class PretextDataset(Dataset):
    """
    自监督图像池，取样时在线生成预训练任务样本

    键为 (抽取序号, 池索引)，变换种子由 seed_words + 抽取序号派生，
    因此结果与 DataLoader worker 的调度顺序无关。
    """

    def __init__(self, pool: np.ndarray, config: TrainConfig, seed_words: Sequence[int]):
        if len(pool) == 0:
            raise InvalidArgumentError("自监督图像池不能为空")
        self.pool = pool
        self.task = config.selfsup_task
        self.source = label_source_for(config)
        self.jigsaw_config = config.jigsaw_config()
        self.fill_value = config.fill_value
        self.seed_words = [int(w) for w in seed_words]

    @property
    def in_channels(self) -> int:
        return int(self.pool.shape[-1]) if self.pool.ndim == 4 else 1

    def __len__(self) -> int:
        return len(self.pool)

    def __getitem__(self, key: Tuple[int, int]) -> Tuple[torch.Tensor, torch.Tensor]:
        draw, index = key
        sample = make_pretext_sample(
            self.pool[index],
            self.task,
            self.source,
            [*self.seed_words, int(draw)],
            self.jigsaw_config,
            self.fill_value,
        )
        return to_input_tensor(sample.image[None])[0], torch.tensor(sample.label, dtype=torch.int64)


class NumberedSampler(Sampler):
    """给采样到的索引附上抽取序号: 产出 (序号, 索引)"""

    def __init__(self, sampler: Sampler):
        self.sampler = sampler

    def __iter__(self) -> Iterator[Tuple[int, int]]:
        return iter(enumerate(self.sampler))

    def __len__(self) -> int:
        return len(self.sampler)


def seeded_generator(seed_words: Sequence[int]) -> torch.Generator:
    """由种子序列派生独立的 torch 随机流"""
    generator = torch.Generator()
    generator.manual_seed(int(np.random.SeedSequence([int(w) for w in seed_words]).generate_state(1)[0]))
    return generator


def make_loader(
    dataset: Dataset,
    batch_size: int,
    num_batches: int,
    seed_words: Sequence[int],
    workers: int = 0,
) -> DataLoader:
    """
    有放回随机抽样的 DataLoader，最多产出 num_batches 个批次

    PretextDataset 会自动包一层 NumberedSampler，使每次抽取带上序号。
    """
    generator = seeded_generator(seed_words)
    sampler: Sampler = RandomSampler(
        dataset,
        replacement=True,
        num_samples=batch_size * num_batches,
        generator=generator,
    )
    if isinstance(dataset, PretextDataset):
        sampler = NumberedSampler(sampler)
    return DataLoader(dataset, batch_size=batch_size, sampler=sampler, num_workers=workers, generator=generator)


def resolve_selfsup_pool(
    config: TrainConfig,
    train_samples: Sequence[LabeledSample],
    unlabeled: Optional[UnlabeledPool] = None,
) -> np.ndarray:
    """
    按 selfsup_source 组装自监督图像池（已归一化）

    - same: 监督训练图像
    - extra: 仅无标签图像池
    - both: 训练图像 + 无标签图像池
    """
    source = config.selfsup_source
    if source == SelfSupSource.SAME:
        images = [s.image for s in train_samples]
    else:
        if unlabeled is None or len(unlabeled) == 0:
            raise InvalidArgumentError(f"selfsup_source={source.value} 需要非空的无标签图像池")
        images = list(unlabeled.images)
        if source == SelfSupSource.BOTH:
            images = [s.image for s in train_samples] + images
    ArgValidator.require(len(images) > 0, "自监督图像池不能为空")
    return normalize_images(np.stack(images))


# ==================== 训练循环 ====================


def _save_and_evaluate(
    run: TrainingRun,
    step: int,
    evaluator: Optional[Evaluator],
    checkpoint_dir: Optional[Path],
) -> None:
    path = None
    if checkpoint_dir is not None:
        path = save_checkpoint(
            run.model,
            checkpoint_dir / f"{run.run_id}_step{step:06d}.pt",
            run.config.config_hash(),
            step,
        )
    metrics = evaluator(run.model, step) if evaluator is not None else None
    run.checkpoints.append(CheckpointRecord(step=step, path=path, metrics=metrics))


def run_cotraining(
    config: TrainConfig,
    train_samples: Sequence[LabeledSample],
    unlabeled: Optional[UnlabeledPool] = None,
    evaluator: Optional[Evaluator] = None,
    checkpoint_dir: Optional[Union[str, Path]] = None,
    stop_flag: Optional[StopFlag] = None,
    run_id: str = "run",
    data_workers: int = app_config.DATA_WORKERS,
) -> TrainingRun:
    """
    交替协同训练主循环

    Args:
        config: 训练配置
        train_samples: 带标签的监督训练集
        unlabeled: 额外的无标签图像池（selfsup_source 为 extra/both 时使用）
        evaluator: 每个检查点调用的评估函数
        checkpoint_dir: 检查点目录，None 表示不写文件
        stop_flag: 外部停止标志
        run_id: 运行标识
        data_workers: 预取批次的 DataLoader worker 数，不影响结果

    Returns:
        TrainingRun（模型、逐步历史、检查点）

    Raises:
        InvalidArgumentError: 数据集为空
        TrainingAbortedError: 出现 NaN/Inf 损失（保留最后一个检查点）
    """
    supervised = SupervisedDataset(train_samples, config.supervised_task)
    pretext: Optional[PretextDataset] = None
    if not config.is_baseline:
        pretext = PretextDataset(resolve_selfsup_pool(config, train_samples, unlabeled), config, (config.seed, 3))

    model = build_model(config, in_channels=supervised.in_channels)
    optimizer = build_optimizer(model, config)
    run = TrainingRun(
        run_id=run_id,
        config=config,
        model=model,
        selfsup_pool_size=len(pretext) if pretext is not None else 0,
    )
    ckpt_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None

    # 任务序列与两路数据抽样使用独立的随机流，任务序列只由种子决定
    task_rng = np.random.default_rng([config.seed, 0])
    sup_batches = iter(
        make_loader(supervised, config.sup_batch_size, config.total_steps, (config.seed, 1), data_workers)
    )
    selfsup_batches = None
    if pretext is not None:
        selfsup_batches = iter(
            make_loader(pretext, config.selfsup_batch_size, config.total_steps, (config.seed, 2), data_workers)
        )

    log_message(
        "训练",
        f"{run_id}: 开始, R={config.training_ratio}, ω={config.omega}, "
        f"任务={config.selfsup_task.value}, 步数={config.total_steps}, "
        f"监督样本={len(supervised)}, 自监督池={run.selfsup_pool_size}",
        logger=logger,
    )

    for step in range(1, config.total_steps + 1):
        if stop_flag is not None and stop_flag.is_stop_requested():
            log_message("训练", f"{run_id}: 第{step}步前收到停止请求 ({stop_flag.reason})", "WARNING", logger)
            run.stopped = True
            if not run.checkpoints or run.checkpoints[-1].step != step - 1:
                _save_and_evaluate(run, step - 1, evaluator, ckpt_dir)
            break

        task = sample_task(task_rng, config.training_ratio)
        start = time.perf_counter()
        try:
            if task == TaskChoice.SUPERVISED:
                batch = next(sup_batches)
                result = supervised_step(batch, model, optimizer, step)
            else:
                assert selfsup_batches is not None
                batch = next(selfsup_batches)
                result = selfsup_step(batch, model, optimizer, config.omega, step)
        except TrainingAbortedError as e:
            last = run.checkpoints[-1].path if run.checkpoints else None
            log_message("训练", f"{run_id}: 训练中止 - {e}，最后检查点: {last}", "ERROR", logger)
            raise TrainingAbortedError(str(e), step, str(last) if last else None) from e

        # 计时包含数据准备
        wall_ms = (time.perf_counter() - start) * 1000.0
        run.history.append(StepResult(step=step, task=task, loss=result.loss, wall_ms=wall_ms))

        if step % config.log_every == 0:
            log_step(step, config.total_steps, task.value, result.loss, logger=logger)
        if step % config.eval_every == 0 or step == config.total_steps:
            _save_and_evaluate(run, step, evaluator, ckpt_dir)

    counts = task_counts(run.history)
    log_message(
        "训练",
        f"{run_id}: 完成 {len(run.history)} 步, 监督={counts[TaskChoice.SUPERVISED]}, "
        f"自监督={counts[TaskChoice.SELFSUP]}",
        logger=logger,
    )
    return run


def run_pretext_training(
    config: TrainConfig,
    images: Sequence[np.ndarray],
    steps: Optional[int] = None,
    data_workers: int = app_config.DATA_WORKERS,
) -> Tuple[CotrainNet, List[StepResult]]:
    """
    只训练自监督分支 (θ_a ∪ θ_c)，用于检验预训练任务本身可学习

    Args:
        config: 训练配置（使用其中的自监督任务设置）
        images: uint8 图像列表
        steps: 步数，默认 config.total_steps
        data_workers: DataLoader worker 数

    Returns:
        (模型, 历史)
    """
    ArgValidator.require(len(images) > 0, "图像列表不能为空")
    pretext = PretextDataset(normalize_images(np.stack(images)), config, (config.seed, 3))
    model = build_model(config, in_channels=pretext.in_channels)
    optimizer = build_optimizer(model, config)
    total = steps or config.total_steps
    batches = iter(make_loader(pretext, config.selfsup_batch_size, total, (config.seed, 2), data_workers))
    history: List[StepResult] = []
    for step in range(1, total + 1):
        start = time.perf_counter()
        result = selfsup_step(next(batches), model, optimizer, config.omega, step)
        history.append(
            StepResult(step, TaskChoice.SELFSUP, result.loss, (time.perf_counter() - start) * 1000.0)
        )
        if step % config.log_every == 0:
            log_step(step, total, f"{config.selfsup_task.value}(仅自监督)", result.loss, logger=logger)
    return model, history


# ==================== 历史记录 ====================


def task_counts(history: Sequence[StepResult]) -> Dict[TaskChoice, int]:
    """统计每种任务的步数"""
    counts = Counter(result.task for result in history)
    return {choice: counts.get(choice, 0) for choice in TaskChoice}


def history_frame(history: Sequence[StepResult]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "step": [r.step for r in history],
            "task": [r.task.value for r in history],
            "loss": [r.loss for r in history],
            "wall_ms": [r.wall_ms for r in history],
        }
    )


def write_history_csv(history: Sequence[StepResult], path: Union[str, Path]) -> Path:
    """历史写为 CSV: step,task,loss,wall_ms"""
    output = Path(path)
    output.parent.mkdir(parents=True, exist_ok=True)
    history_frame(history).to_csv(output, index=False)
    return output
