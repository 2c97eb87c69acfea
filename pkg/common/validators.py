"""
参数验证与异常定义
所有模块共用的异常层级和参数检查工具
"""

from typing import Any, Optional, Sequence

# ==================== 异常类定义 ====================


class CotrainError(Exception):
    """工具包根异常"""

    pass


class InvalidArgumentError(CotrainError, ValueError):
    """参数不合法"""

    pass


class ConfigError(InvalidArgumentError):
    """配置文件或命令行覆盖项不合法"""

    pass


class PermsetParseError(CotrainError):
    """置换集文件解析失败"""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"第{line_number}行: {message}")
        self.line_number = line_number


class TrainingAbortedError(CotrainError):
    """训练中止（损失为NaN/Inf）"""

    def __init__(self, message: str, step: int, last_checkpoint: Optional[str] = None):
        super().__init__(message)
        self.step = step
        self.last_checkpoint = last_checkpoint


class CheckpointError(CotrainError):
    """检查点与模型结构不匹配"""

    pass


class DataSourceError(CotrainError):
    """数据源不可用（空目录、清单损坏等）"""

    pass


# ==================== 参数验证器 ====================


class ArgValidator:
    """参数验证器 - 统一的前置条件检查"""

    @staticmethod
    def require(condition: bool, message: str) -> None:
        """
        条件不满足时抛出 InvalidArgumentError

        Args:
            condition: 需要成立的条件
            message: 错误信息
        """
        if not condition:
            raise InvalidArgumentError(message)

    @staticmethod
    def require_range(
        value: Any,
        low: Optional[Any] = None,
        high: Optional[Any] = None,
        name: str = "参数",
    ) -> Any:
        """
        验证数值在闭区间 [low, high] 内

        Args:
            value: 待验证的值
            low: 下界，None 表示不限
            high: 上界，None 表示不限
            name: 参数名，用于错误信息

        Returns:
            原值

        Raises:
            InvalidArgumentError: 超出范围
        """
        if low is not None and value < low:
            raise InvalidArgumentError(f"{name}={value} 小于下界 {low}")
        if high is not None and value > high:
            raise InvalidArgumentError(f"{name}={value} 大于上界 {high}")
        return value

    @staticmethod
    def require_same_shape(a: Sequence[int], b: Sequence[int], context: str = "") -> None:
        """验证两个形状完全一致"""
        if tuple(a) != tuple(b):
            raise InvalidArgumentError(f"{context}形状不一致: {tuple(a)} vs {tuple(b)}")

    @staticmethod
    def require_divisible(value: int, divisor: int, name: str = "尺寸") -> None:
        """验证 value 能被 divisor 整除"""
        if divisor <= 0 or value % divisor != 0:
            raise InvalidArgumentError(f"{name}={value} 不能被 {divisor} 整除")
