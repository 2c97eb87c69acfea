"""
自监督协同训练命令行入口

子命令:
1. permset generate|inspect  生成/查看拼图置换集
2. pretext preview           导出预训练任务样本图片
3. train                     单次协同训练（或 --pretext-only 只训练自监督分支）
4. experiment compare|domain|noise  三组实验
5. report                    从指标 CSV 重建图

退出码: 0 成功；1 参数或运行错误；2 实验不变量检查失败；130 用户中断
"""

import argparse
import signal
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

# 配置标准输出使用 UTF-8 编码（解决 Windows GBK 编码问题）
if sys.platform == "win32":
    import io

    sys.stdout = io.TextIOWrapper(sys.stdout.buffer, encoding="utf-8")
    sys.stderr = io.TextIOWrapper(sys.stderr.buffer, encoding="utf-8")

from pydantic import ValidationError  # noqa: E402

import config  # noqa: E402
from common.config_models import DatasetSpec, SelfSupTask, TrainConfig, load_train_config  # noqa: E402
from common.logger import get_logger, log_message, log_metric, setup_logger  # noqa: E402
from common.stop_flag import StopFlag  # noqa: E402
from common.validators import ConfigError, CotrainError, InvalidArgumentError  # noqa: E402

logger = get_logger("cli")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2
EXIT_INTERRUPTED = 130


# ==================== 参数定义 ====================


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    """为 TrainConfig 的每个字段生成 --<字段名> 参数（值交给 pydantic 转换）"""
    group = parser.add_argument_group("训练配置", "覆盖配置文件和默认值")
    group.add_argument("--config", type=Path, default=None, help="key = value 格式的配置文件")
    for name, field in TrainConfig.model_fields.items():
        default = field.default
        if isinstance(default, tuple):
            default = ",".join(str(v) for v in default)
        elif hasattr(default, "value"):
            default = default.value
        group.add_argument(
            f"--{name.replace('_', '-')}",
            dest=name,
            default=None,
            metavar=name.upper(),
            help=f"默认: {default}",
        )


def add_dataset_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("数据集")
    group.add_argument("--n-samples", type=int, default=config.NUM_SAMPLES, help="合成样本数")
    group.add_argument("--night-dir", default=None, help="真实夜间图像目录（默认用夜间变换合成）")


def config_from_args(args: argparse.Namespace) -> TrainConfig:
    overrides: Dict[str, Any] = {name: getattr(args, name, None) for name in TrainConfig.model_fields}
    return load_train_config(args.config, overrides)


def dataset_from_args(args: argparse.Namespace, train_config: TrainConfig) -> DatasetSpec:
    try:
        return DatasetSpec(n_samples=args.n_samples, image_size=train_config.image_size)
    except ValidationError as e:
        raise ConfigError(f"数据集参数无效: {e}") from e


def parse_int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise InvalidArgumentError(f"无法解析整数列表: {text!r}") from e


def parse_float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise InvalidArgumentError(f"无法解析数值列表: {text!r}") from e


def parse_tasks(text: Optional[str]) -> Optional[List[SelfSupTask]]:
    if not text:
        return None
    try:
        return [SelfSupTask(part.strip()) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise InvalidArgumentError(f"未知的自监督任务: {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="main.py",
        description="自监督协同训练: 拼图/旋转预训练任务与监督任务交替训练",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
示例:
    python main.py permset generate --n-tiles 9 --num-permutations 30
    python main.py pretext preview --task rotation --count 8
    python main.py train --training-ratio 6 --selfsup-task rotation --total-steps 2000
    python main.py train --pretext-only --selfsup-task jigsaw --total-steps 2000
    python main.py experiment compare --seeds 0,1,2 --workers 3
    python main.py experiment domain --tasks jigsaw,rotation
    python main.py experiment noise --sigmas 0,5,10,15
    python main.py report output/experiments/compare_metrics.csv
        """,
    )
    parser.add_argument("--log-level", default=config.LOG_LEVEL, help="日志级别")
    parser.add_argument("--output-dir", type=Path, default=config.OUTPUT_DIR, help="输出根目录")
    commands = parser.add_subparsers(dest="command", required=True)

    # permset
    permset = commands.add_parser("permset", help="拼图置换集").add_subparsers(dest="action", required=True)
    generate = permset.add_parser("generate", help="生成置换集")
    generate.add_argument("--n-tiles", type=int, default=config.GRID_N**2)
    generate.add_argument("--num-permutations", type=int, default=config.NUM_PERMUTATIONS)
    generate.add_argument("--out", type=Path, default=None, help=f"默认: {config.PERMSET_FILE.name}")
    inspect = permset.add_parser("inspect", help="查看置换集文件")
    inspect.add_argument("path", type=Path)

    # pretext
    pretext = commands.add_parser("pretext", help="预训练任务").add_subparsers(dest="action", required=True)
    preview = pretext.add_parser("preview", help="导出变换后的样本图片")
    preview.add_argument("--task", choices=[t.value for t in SelfSupTask], default=SelfSupTask.JIGSAW.value)
    preview.add_argument("--count", type=int, default=8)
    preview.add_argument("--seed", type=int, default=0)
    preview.add_argument("--image-size", type=int, default=config.IMAGE_SIZE)
    preview.add_argument("--gap", type=int, default=config.JIGSAW_GAP)
    preview.add_argument("--num-permutations", type=int, default=config.NUM_PERMUTATIONS)
    preview.add_argument("--out", type=Path, default=None)

    # train
    train = commands.add_parser("train", help="单次训练")
    add_config_arguments(train)
    add_dataset_arguments(train)
    train.add_argument("--run-id", default="train")
    train.add_argument("--pretext-only", action="store_true", help="只训练自监督分支")
    train.add_argument("--dump-masks", type=int, default=0, help="导出前 N 张测试图像的预测掩码")

    # experiment
    experiment = commands.add_parser("experiment", help="实验").add_subparsers(dest="preset", required=True)
    for name, text in (("compare", "基线 vs 拼图 vs 旋转"), ("domain", "白天 -> 夜间域适应"), ("noise", "输入噪声扫描")):
        sub = experiment.add_parser(name, help=text)
        add_config_arguments(sub)
        add_dataset_arguments(sub)
        sub.add_argument("--seeds", default=",".join(str(s) for s in config.EXPERIMENT_SEEDS))
        sub.add_argument("--workers", type=int, default=config.EXPERIMENT_WORKERS)
        if name in ("compare", "domain"):
            sub.add_argument("--tasks", default=None, help="逗号分隔的自监督任务")
        if name == "noise":
            sub.add_argument("--sigmas", default=",".join(str(s) for s in config.NOISE_SIGMAS))

    # report
    report = commands.add_parser("report", help="从指标 CSV 重建图")
    report.add_argument("csv", type=Path, nargs="+")
    report.add_argument("--out", type=Path, default=None)
    return parser


# ==================== 子命令 ====================


def cmd_permset(args: argparse.Namespace) -> int:
    from permutation_set import describe_permset, generate_permutation_set, load_permset, save_permset

    if args.action == "generate":
        permset = generate_permutation_set(args.n_tiles, args.num_permutations)
        out = args.out or args.output_dir / f"permutations_{args.n_tiles}_{args.num_permutations}.txt"
        save_permset(permset, out)
        print(f"置换集已保存: {out}")
    else:
        permset = load_permset(args.path)
    for key, value in describe_permset(permset).items():
        print(f"  {key}: {value}")
    return EXIT_OK


def cmd_pretext(args: argparse.Namespace) -> int:
    from common.config_models import JigsawConfig
    from cotrainer import cached_permutation_set
    from data_sources.shapes import gen_shapes_dataset
    from pretext_tasks import write_pretext_preview

    dataset = DatasetSpec(n_samples=max(args.count + 1, 2), image_size=args.image_size)
    train, test = gen_shapes_dataset(dataset, args.seed)
    images = [s.image for s in (train + test)[: args.count]]
    task = SelfSupTask(args.task)
    jigsaw = JigsawConfig(grid_n=config.GRID_N, gap=args.gap, num_permutations=args.num_permutations)
    if task == SelfSupTask.JIGSAW:
        source: Any = cached_permutation_set(config.GRID_N**2, args.num_permutations)
    else:
        source = config.NUM_ROTATIONS
    out = args.out or args.output_dir / "pretext_preview"
    paths = write_pretext_preview(images, task, source, out, seed=args.seed, jigsaw_config=jigsaw)
    print(f"已写入 {len(paths)} 张图片: {out}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace, stop_flag: StopFlag) -> int:
    from cotrainer import run_cotraining, run_pretext_training, write_history_csv
    from experiments.runner import prepare_data
    from scores.evaluator import dump_prediction_masks, evaluate_model, pretext_accuracy
    from scores.metrics_report import write_metrics_csv

    train_config = config_from_args(args)
    dataset = dataset_from_args(args, train_config)
    data = prepare_data(dataset, train_config.seed, args.night_dir)
    out_dir = args.output_dir / "runs" / args.run_id
    log_message("训练", f"{args.run_id}: 配置哈希 {train_config.config_hash()}", logger=logger)

    if args.pretext_only:
        model, history = run_pretext_training(train_config, [s.image for s in data.train])
        accuracy = pretext_accuracy(model, [s.image for s in data.test], train_config)
        log_metric(args.run_id, "pretext_accuracy", accuracy, train_config.total_steps, logger=logger)
        write_history_csv(history, out_dir / "history.csv")
        print(f"自监督准确率: {accuracy:.4f}，输出目录: {out_dir}")
        return EXIT_OK

    def evaluator(model, step):
        return evaluate_model(model, data.test, train_config, run_id=args.run_id, step=step)

    run = run_cotraining(
        train_config,
        data.train,
        unlabeled=data.night_pool,
        evaluator=evaluator,
        checkpoint_dir=out_dir / "checkpoints",
        stop_flag=stop_flag,
        run_id=args.run_id,
    )
    write_history_csv(run.history, out_dir / "history.csv")
    rows = [row for record in run.checkpoints for row in record.metrics.to_rows("train")]
    write_metrics_csv(rows, out_dir / "metrics.csv")
    final = run.final_metrics
    if final is not None:
        for metric, value in final.scalar_metrics().items():
            if value is not None:
                log_metric(args.run_id, metric, value, final.step, logger=logger)
    if args.dump_masks > 0:
        dump_prediction_masks(run.model, data.test, out_dir / "pred_masks", args.dump_masks)
    print(f"训练{'已中断' if run.stopped else '完成'}，输出目录: {out_dir}")
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    from experiments import run_compare, run_domain, run_noise

    train_config = config_from_args(args)
    dataset = dataset_from_args(args, train_config)
    seeds = parse_int_list(args.seeds)
    out_dir = args.output_dir / "experiments"
    if not seeds:
        raise InvalidArgumentError("--seeds 不能为空")

    if args.preset == "compare":
        tasks = parse_tasks(args.tasks) or [SelfSupTask.JIGSAW, SelfSupTask.ROTATION]
        results = [run_compare(train_config, dataset, seeds, out_dir, args.workers, tasks)]
    elif args.preset == "domain":
        results = [
            run_domain(train_config, dataset, seeds, out_dir, args.workers, parse_tasks(args.tasks), args.night_dir)
        ]
    else:
        compare = run_compare(train_config, dataset, seeds, out_dir, args.workers)
        results = [compare, run_noise(train_config, compare, dataset, seeds, parse_float_list(args.sigmas), out_dir)]

    for result in results:
        print(f"\n[{result.preset}] 汇总:")
        print(result.summary.to_string(index=False))
        for check in result.checks:
            print(f"  [{check.kind}] {check.name}: {'通过' if check.passed else '未通过'} - {check.detail}")
    print(f"\n输出目录: {out_dir}")
    return EXIT_OK if all(result.passed for result in results) else EXIT_CHECK_FAILED


def cmd_report(args: argparse.Namespace) -> int:
    from experiments.plotting import regenerate_plots

    for csv_path in args.csv:
        for path in regenerate_plots(csv_path, args.out):
            print(f"  {path}")
    return EXIT_OK


# ==================== 入口 ====================


def install_stop_handler(stop_flag: StopFlag) -> None:
    """第一次 Ctrl+C 请求在步与步之间停止，第二次直接中断"""

    def handler(signum, frame):
        if stop_flag.is_stop_requested():
            raise KeyboardInterrupt
        stop_flag.request_stop("SIGINT")
        log_message("训练", "收到中断信号，将在当前步结束后保存检查点并停止（再按一次强制退出）", "WARNING", logger)

    signal.signal(signal.SIGINT, handler)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """主函数 - 命令行接口"""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logger(level=args.log_level, log_file=config.LOG_FILE)
    args.output_dir.mkdir(parents=True, exist_ok=True)

    try:
        if args.command == "permset":
            return cmd_permset(args)
        if args.command == "pretext":
            return cmd_pretext(args)
        if args.command == "train":
            stop_flag = StopFlag()
            install_stop_handler(stop_flag)
            return cmd_train(args, stop_flag)
        if args.command == "experiment":
            return cmd_experiment(args)
        return cmd_report(args)
    except KeyboardInterrupt:
        print("\n\n用户中断操作")
        return EXIT_INTERRUPTED
    except CotrainError as e:
        print(f"\n处理失败: {e}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
