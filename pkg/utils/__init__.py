"""
Beacon Lab - 工具模块
====================

模块说明:
- config_manager: 配置文件管理器
- logger: 统一日志系统

作者: Beacon Lab Team
版本: 1.0.0
"""

__version__ = "1.0.0"
__author__ = "Beacon Lab Team"

from .config_manager import ConfigManager, ConfigInvalid, get_config
from .logger import setup_logger, get_logger

__all__ = [
    "ConfigManager",
    "ConfigInvalid",
    "get_config",
    "setup_logger",
    "get_logger",
]
