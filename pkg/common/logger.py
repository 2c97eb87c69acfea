"""
统一日志模块
提供格式化的日志输出，同时支持终端显示和文件持久化
"""

import os
import sys
import logging
from datetime import datetime
from typing import Optional

# 日志级别映射
LOG_LEVELS = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
    "CRITICAL": logging.CRITICAL,
}

# 默认日志格式
DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# 根logger名称，各模块使用 Cotrain.<模块> 子logger
ROOT_LOGGER_NAME = "Cotrain"


def setup_logger(
    name: str = ROOT_LOGGER_NAME,
    level: str = "INFO",
    log_file: Optional[str] = None,
    format_str: Optional[str] = None,
    enable_console: bool = True,
) -> logging.Logger:
    """
    设置日志系统

    Args:
        name: 日志名称
        level: 日志级别 (DEBUG/INFO/WARNING/ERROR/CRITICAL)
        log_file: 日志文件路径，None表示不写入文件
        format_str: 日志格式字符串
        enable_console: 是否输出到控制台

    Returns:
        配置好的Logger实例
    """
    logger = logging.getLogger(name)
    log_level = LOG_LEVELS.get(level.upper(), logging.INFO)
    logger.setLevel(log_level)

    # 清除已有的处理器（避免重复）
    logger.handlers.clear()

    formatter = logging.Formatter(format_str or DEFAULT_FORMAT)

    if enable_console:
        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setLevel(log_level)
        console_handler.setFormatter(formatter)
        # 强制刷新每个日志消息
        console_handler.flush = sys.stdout.flush
        logger.addHandler(console_handler)

    if log_file:
        try:
            os.makedirs(os.path.dirname(log_file) or ".", exist_ok=True)
            file_handler = logging.FileHandler(log_file, encoding="utf-8")
            file_handler.setLevel(log_level)
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)
        except OSError:
            pass  # 文件写入失败不影响日志输出

    return logger


def get_logger(module: str) -> logging.Logger:
    """获取 Cotrain.<module> 子logger"""
    return logging.getLogger(f"{ROOT_LOGGER_NAME}.{module}")


def log_message(
    tag: str,
    content: str,
    level: str = "INFO",
    logger: Optional[logging.Logger] = None,
) -> str:
    """
    统一的日志消息输出

    Args:
        tag: 标签，如 [训练], [数据], [评估] 等
        content: 消息内容
        level: 日志级别
        logger: 使用的logger实例，None则使用默认logger

    Returns:
        格式化后的完整消息字符串
    """
    timestamp = datetime.now().strftime("%H:%M:%S")
    full_message = f"[{timestamp}] [{tag}] {content}"

    if logger is None:
        logger = logging.getLogger(ROOT_LOGGER_NAME)

    logger.log(LOG_LEVELS.get(level.upper(), logging.INFO), full_message)
    return full_message


def log_step(
    step: int,
    total: int,
    task: str,
    loss: float,
    logger: Optional[logging.Logger] = None,
) -> None:
    """
    记录训练步进度

    Args:
        step: 当前步（从1开始）
        total: 总步数
        task: 本步选择的任务
        loss: 本步损失
        logger: 使用的logger实例
    """
    content = f"[{step}/{total}] {task} - loss={loss:.4f}"
    log_message("训练", content, level="INFO", logger=logger)


def log_metric(
    run_id: str,
    metric: str,
    value: float,
    step: Optional[int] = None,
    logger: Optional[logging.Logger] = None,
) -> None:
    """
    记录评估指标

    Args:
        run_id: 运行标识
        metric: 指标名称
        value: 指标值
        step: 训练步
        logger: 使用的logger实例
    """
    content = f"{run_id}: {metric}={value:.4f}"
    if step is not None:
        content += f" | 步数: {step}"
    log_message("评估", content, level="INFO", logger=logger)


# 便捷函数
def info(tag: str, content: str) -> str:
    """输出INFO级别日志"""
    return log_message(tag, content, level="INFO")


def warning(tag: str, content: str) -> str:
    """输出WARNING级别日志"""
    return log_message(tag, content, level="WARNING")


def error(tag: str, content: str) -> str:
    """输出ERROR级别日志"""
    return log_message(tag, content, level="ERROR")


def debug(tag: str, content: str) -> str:
    """输出DEBUG级别日志"""
    return log_message(tag, content, level="DEBUG")


# 初始化默认logger（仅控制台，文件输出由 main.py 配置）
_default_logger = setup_logger()
