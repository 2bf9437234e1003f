"""
日志系统 - Beacon Lab
====================

仿真器与分析工具共用的日志管理，基于 loguru。

主要功能:
1. 控制台与轮转文件双通道输出
2. 按组件名绑定的日志器
3. 执行耗时与异常记录装饰器
4. 长仿真的进度节流输出

作者: Beacon Lab Team
版本: 1.0.0
"""

import sys
import time
import functools
from pathlib import Path
from typing import Optional, Callable, Any

from loguru import logger


DEFAULT_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | "
    "<level>{level: <8}</level> | "
    "<cyan>{extra[name]}</cyan> | "
    "<level>{message}</level>"
)

# 未绑定名称的记录也需要 extra[name]
logger.configure(extra={"name": "beacon_lab"})


def setup_logger(
    log_level: str = "INFO",
    log_file: Optional[str] = None,
    max_file_size: str = "10 MB",
    rotation_count: int = 5,
    enable_console: bool = True,
    log_format: Optional[str] = None
) -> None:
    """设置全局日志系统

    Args:
        log_level: 日志级别
        log_file: 日志文件路径，None表示不写文件
        max_file_size: 单个日志文件最大大小
        rotation_count: 保留的日志文件数量
        enable_console: 是否启用控制台输出
        log_format: 自定义日志格式
    """
    logger.remove()
    fmt = log_format or DEFAULT_FORMAT

    if enable_console:
        logger.add(sys.stderr, level=log_level, format=fmt, colorize=True, backtrace=False)

    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        logger.add(
            log_file,
            level=log_level,
            format=fmt,
            rotation=max_file_size,
            retention=rotation_count,
            compression="zip",
            encoding="utf-8",
        )

    logger.debug(f"日志系统初始化完成: 级别={log_level}, 文件={log_file}, 控制台={enable_console}")


def get_logger(name: Optional[str] = None):
    """获取绑定组件名的日志器"""
    return logger.bind(name=name or "beacon_lab")


def log_performance(func: Callable) -> Callable:
    """记录函数执行耗时"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        func_logger = get_logger(f"{func.__module__}.{func.__name__}")
        start = time.perf_counter()
        try:
            result = func(*args, **kwargs)
        except Exception as e:
            func_logger.error(f"执行失败: {func.__name__} (耗时: {time.perf_counter() - start:.3f}秒) - {e}")
            raise
        func_logger.info(f"执行完成: {func.__name__} (耗时: {time.perf_counter() - start:.3f}秒)")
        return result

    return wrapper


def log_exception(func: Callable) -> Callable:
    """记录异常堆栈后继续抛出"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except Exception as e:
            get_logger(f"{func.__module__}.{func.__name__}").exception(f"函数 {func.__name__} 发生异常: {e}")
            raise

    return wrapper


class ProgressReporter:
    """按固定间隔输出进度，避免长仿真刷屏

    Usage:
        progress = ProgressReporter("仿真", total=4700, interval=500)
        for epoch in range(4700):
            progress.update(epoch, extra="...")
    """

    def __init__(self, label: str, total: int, interval: int = 500, name: Optional[str] = None):
        self.label = label
        self.total = total
        self.interval = max(1, interval)
        self.started = time.perf_counter()
        self._logger = get_logger(name or "progress")

    def update(self, step: int, extra: Any = "") -> None:
        if step == 0 or step % self.interval:
            return
        elapsed = time.perf_counter() - self.started
        self._logger.info(f"{self.label}进度: {step}/{self.total} (已用 {elapsed:.1f}秒) {extra}")


# ==================== 默认初始化 ====================

def init_default_logger() -> None:
    """按 [LOGGING_CONFIG] 初始化日志"""
    try:
        from .config_manager import get_config
        settings = get_config().logging_config

        setup_logger(
            log_level=settings['log_level'],
            log_file=settings['log_file'] or None,
            max_file_size=f"{settings['max_log_size_mb']} MB",
            rotation_count=settings['log_rotation_count'],
            enable_console=settings['enable_console_output'],
        )
    except Exception as e:
        setup_logger(log_level="INFO", log_file=None, enable_console=True)
        logger.warning(f"使用默认日志配置，配置加载失败: {e}")


if __name__ != "__main__":
    init_default_logger()
