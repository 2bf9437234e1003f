"""
配置管理器 - Beacon Lab
======================

负责读取仿真场景、博弈、分析、输出、日志与性能配置。

主要功能:
1. 读取和解析 INI 配置文件 (扁平 key = value，按段分组)
2. 提供类型安全的配置访问接口
3. 支持命令行 --set 覆盖
4. 配置验证和默认值处理

作者: Beacon Lab Team
版本: 1.0.0
"""

import os
import configparser
from typing import Dict, Any, Optional, List, Iterable
from pathlib import Path

# logger 模块初始化之前只能使用标准日志
import logging
logger = logging.getLogger(__name__)


class ConfigInvalid(ValueError):
    """配置无效 (缺失、类型错误或取值越界)"""


class ConfigManager:
    """配置管理器类"""

    REQUIRED_SECTIONS = ['SCENARIO', 'GAME', 'LOGGING_CONFIG']

    # --set 可覆盖的键
    KNOWN_KEYS = {
        'SCENARIO': {'n', 'beta0', 'p0', 'partition', 'gst', 'delta_thirds', 'j', 'epochs', 'seed', 'strategy',
                     'rho', 'stop_on_conflict'},
        'GAME': {'slots', 'attesters', 'rho', 'x', 'fees', 'fee_set', 'w_f', 'w_g', 'proposers',
                 'attesters_strategy', 'chi_mode', 'seed', 'max_offset'},
        'ANALYSIS': {'p0', 'curve_horizon', 'curve_step', 'mc_walkers', 'mc_seed'},
        'OUTPUT_CONFIG': {'out_dir', 'schema_file', 'float_format'},
        'LOGGING_CONFIG': {'log_level', 'log_file', 'max_log_size_mb', 'log_rotation_count',
                           'enable_console_output'},
        'PERFORMANCE_CONFIG': {'max_concurrent_operations', 'progress_interval_epochs', 'memory_usage_limit_mb'},
    }

    def __init__(self, config_path: Optional[str] = None):
        """初始化配置管理器

        Args:
            config_path: 配置文件路径，如果为None则使用仓库根目录的 config.ini
        """
        self.config = configparser.ConfigParser(interpolation=None)
        self.config_path = config_path or self._get_default_config_path()
        self._load_config()

    def _get_default_config_path(self) -> str:
        return str(Path(__file__).parent.parent / "config.ini")

    def _load_config(self) -> None:
        """加载配置文件"""
        self.config = configparser.ConfigParser(interpolation=None)
        if not os.path.exists(self.config_path):
            logger.warning(f"配置文件不存在: {self.config_path}，将使用内置默认值")
            return
        try:
            self.config.read(self.config_path, encoding='utf-8')
            logger.info(f"配置文件加载成功: {self.config_path}")
        except configparser.Error as e:
            logger.error(f"配置文件解析失败: {e}")
            raise ConfigInvalid(f"配置文件解析失败: {self.config_path}: {e}") from e

    def get(self, section: str, key: str, fallback: Any = None) -> Any:
        """获取字符串配置值 (展开环境变量)"""
        value = self.config.get(section, key, fallback=fallback)
        if isinstance(value, str):
            value = os.path.expandvars(value.strip())
        return value

    def _typed(self, caster, section: str, key: str, fallback: Any) -> Any:
        raw = self.get(section, key, None)
        if raw is None or raw == "":
            return fallback
        try:
            return caster(raw)
        except ValueError as e:
            raise ConfigInvalid(f"[{section}] {key} = {raw!r} 无法解析: {e}") from e

    def get_int(self, section: str, key: str, fallback: int = 0) -> int:
        """获取整数配置值"""
        return self._typed(int, section, key, fallback)

    def get_float(self, section: str, key: str, fallback: float = 0.0) -> float:
        """获取浮点数配置值"""
        return self._typed(float, section, key, fallback)

    def get_bool(self, section: str, key: str, fallback: bool = False) -> bool:
        """获取布尔配置值"""
        raw = self.get(section, key, None)
        if raw is None or raw == "":
            return fallback
        lowered = raw.lower()
        if lowered in self.config.BOOLEAN_STATES:
            return self.config.BOOLEAN_STATES[lowered]
        raise ConfigInvalid(f"[{section}] {key} = {raw!r} 不是布尔值")

    def get_list(self, section: str, key: str, separator: str = ',', fallback: Optional[list] = None) -> list:
        """获取列表配置值"""
        value = self.get(section, key)
        if not value:
            return list(fallback or [])
        return [item.strip() for item in value.split(separator) if item.strip()]

    def get_float_list(self, section: str, key: str) -> List[float]:
        try:
            return [float(item) for item in self.get_list(section, key)]
        except ValueError as e:
            raise ConfigInvalid(f"[{section}] {key} 含有非数值项: {e}") from e

    def set(self, section: str, key: str, value: Any) -> None:
        """设置配置值"""
        if not self.config.has_section(section):
            self.config.add_section(section)
        self.config.set(section, key, str(value))

    def apply_overrides(self, overrides: Iterable[str], default_section: str) -> None:
        """应用命令行覆盖项

        Args:
            overrides: 形如 ``key=value`` 或 ``SECTION.key=value`` 的字符串
            default_section: 未指定段名时写入的段
        """
        for item in overrides or []:
            if "=" not in item:
                raise ConfigInvalid(f"覆盖项格式错误 (应为 key=value): {item!r}")
            name, value = item.split("=", 1)
            name = name.strip()
            section, key = default_section, name
            if "." in name:
                section, key = name.split(".", 1)
                section = section.upper()
            if not key:
                raise ConfigInvalid(f"覆盖项缺少键名: {item!r}")
            if key not in self.KNOWN_KEYS.get(section, ()):
                raise ConfigInvalid(f"未知配置项: [{section}] {key}")
            self.set(section, key, value.strip())
            logger.debug(f"配置覆盖: [{section}] {key} = {value.strip()}")

    def save(self, path: Optional[str] = None) -> None:
        """保存配置到文件"""
        target = path or self.config_path
        with open(target, 'w', encoding='utf-8') as f:
            self.config.write(f)
        logger.info(f"配置已保存到: {target}")

    def reload(self) -> None:
        """重新加载配置文件"""
        self._load_config()

    def validate_config(self) -> bool:
        """验证配置的有效性"""
        for section in self.REQUIRED_SECTIONS:
            if not self.config.has_section(section):
                logger.warning(f"缺少配置段: {section}")
                return False
        try:
            self.scenario_config
            self.game_config
        except ConfigInvalid as e:
            logger.warning(f"配置验证失败: {e}")
            return False
        return True

    # ==================== 分段配置 ====================

    @property
    def scenario_config(self) -> Dict[str, Any]:
        """网络仿真场景配置"""
        section = 'SCENARIO'
        return {
            'n': self.get_int(section, 'n', 100),
            'beta0': self.get_float(section, 'beta0', 0.0),
            'p0': self.get_float(section, 'p0', 0.5),
            'partition': self.get_bool(section, 'partition', False),
            'gst': self.get_int(section, 'gst', -1),
            'delta': self.get_int(section, 'delta_thirds', 1),
            'j': self.get_int(section, 'j', 8),
            'epochs': self.get_int(section, 'epochs', 10),
            'seed': self.get_int(section, 'seed', 1),
            'strategy': self.get(section, 'strategy', 'idle'),
            'rho': self.get_float(section, 'rho', 0.4),
            'stop_on_conflict': self.get_bool(section, 'stop_on_conflict', True),
            'progress_interval': self.get_int('PERFORMANCE_CONFIG', 'progress_interval_epochs', 500),
            'memory_limit_mb': self.get_int('PERFORMANCE_CONFIG', 'memory_usage_limit_mb', 1024),
        }

    @property
    def game_config(self) -> Dict[str, Any]:
        """激励博弈配置"""
        section = 'GAME'
        return {
            's': self.get_int(section, 'slots', 6),
            'a': self.get_int(section, 'attesters', 3),
            'rho': self.get_float(section, 'rho', 0.4),
            'x': self.get_float(section, 'x', 1.0),
            'fees': self.get_float_list(section, 'fees'),
            'fee_set': self.get_float_list(section, 'fee_set') or [1.0, 2.0, 3.0, 4.0],
            'w_f': self.get_float(section, 'w_f', 2.0),
            'w_g': self.get_float(section, 'w_g', 1.0),
            'proposers': self.get(section, 'proposers', 'cunning'),
            'attesters_strategy': self.get(section, 'attesters_strategy', 'obedient'),
            'chi_mode': self.get(section, 'chi_mode', 'analytic'),
            'seed': self.get_int(section, 'seed', 1),
            'max_offset': self.get_int(section, 'max_offset', 3),
        }

    @property
    def analysis_config(self) -> Dict[str, Any]:
        """泄漏分析配置"""
        section = 'ANALYSIS'
        return {
            'p0': self.get_float(section, 'p0', 0.5),
            'curve_horizon': self.get_int(section, 'curve_horizon', 8000),
            'curve_step': self.get_int(section, 'curve_step', 50),
            'mc_walkers': self.get_int(section, 'mc_walkers', 100000),
            'mc_seed': self.get_int(section, 'mc_seed', 7),
        }

    @property
    def output_config(self) -> Dict[str, Any]:
        """输出配置"""
        section = 'OUTPUT_CONFIG'
        return {
            'out_dir': self.get(section, 'out_dir', 'output'),
            'schema_file': self.get(section, 'schema_file', 'data/csv_schema.json'),
            'float_format': self.get(section, 'float_format', '%.10g'),
        }

    @property
    def logging_config(self) -> Dict[str, Any]:
        """日志配置"""
        section = 'LOGGING_CONFIG'
        return {
            'log_level': self.get(section, 'log_level', 'INFO'),
            'log_file': self.get(section, 'log_file', 'logs/beacon_lab.log'),
            'max_log_size_mb': self.get_int(section, 'max_log_size_mb', 10),
            'log_rotation_count': self.get_int(section, 'log_rotation_count', 5),
            'enable_console_output': self.get_bool(section, 'enable_console_output', True),
        }

    @property
    def performance_config(self) -> Dict[str, Any]:
        """性能配置"""
        section = 'PERFORMANCE_CONFIG'
        return {
            'max_concurrent_operations': self.get_int(section, 'max_concurrent_operations', 3),
            'progress_interval_epochs': self.get_int(section, 'progress_interval_epochs', 500),
            'memory_usage_limit_mb': self.get_int(section, 'memory_usage_limit_mb', 1024),
        }


# ==================== 全局实例和便捷函数 ====================

_config_manager_instance: Optional[ConfigManager] = None


def get_config() -> ConfigManager:
    """获取全局配置管理器实例"""
    global _config_manager_instance
    if _config_manager_instance is None:
        _config_manager_instance = ConfigManager()
    return _config_manager_instance


def reload_config() -> None:
    """重新加载配置"""
    if _config_manager_instance is not None:
        _config_manager_instance.reload()


def load_config_file(path: Optional[str]) -> ConfigManager:
    """为 --config 参数创建独立的配置管理器"""
    if path is not None and not os.path.exists(path):
        raise ConfigInvalid(f"配置文件不存在: {path}")
    return ConfigManager(path)


if __name__ == "__main__":
    config = get_config()
    print(f"配置文件路径: {config.config_path}")
    print(f"场景: {config.scenario_config}")
    print(f"博弈: {config.game_config}")
    print(f"验证结果: {config.validate_config()}")
