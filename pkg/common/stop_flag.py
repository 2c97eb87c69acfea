"""
停止标志模块
用于在训练循环中传递停止信号
当用户按下 Ctrl+C 或外部线程请求停止时，训练会在当前步结束后保存检查点并退出
"""

import threading
from typing import Optional


class StopFlag:
    """
    线程安全的停止标志类

    使用示例:
        stop_flag = StopFlag()

        # 在训练循环中检查
        if stop_flag.is_stop_requested():
            break

        # 在信号处理器中设置
        stop_flag.request_stop("interrupt")
    """

    def __init__(self):
        self._event = threading.Event()
        self._reason: Optional[str] = None
        self._lock = threading.Lock()

    def request_stop(self, reason: str = "requested") -> None:
        """请求停止（线程安全），只记录第一次的原因"""
        with self._lock:
            if not self._event.is_set():
                self._reason = reason
                self._event.set()

    def is_stop_requested(self) -> bool:
        """检查是否已请求停止"""
        return self._event.is_set()

    @property
    def reason(self) -> Optional[str]:
        """停止原因，未请求时为 None"""
        with self._lock:
            return self._reason

    def reset(self) -> None:
        """重置停止标志"""
        with self._lock:
            self._reason = None
            self._event.clear()

    def __bool__(self) -> bool:
        return self.is_stop_requested()
