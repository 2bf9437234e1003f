"""
主程序入口 - Beacon Lab
======================

Beacon Lab 共识仿真与分析工具的命令行入口。
从配置文件读取场景，运行仿真、重现表格与曲线、分析激励博弈，结果输出为 CSV。

核心功能:
1. simulate: 网络仿真，逐 epoch 报告 (可按参数并行扫描)
2. tables: 最终确定时间表、β0 边界与弹跳攻击存活概率表
3. game: 激励博弈报告、最优反应检查与 ρ 扫描
4. curves: 泄漏期间的比例、权益与拜占庭比例曲线

退出码: 0 成功，2 配置错误，1 未知表格或读写错误。

作者: Beacon Lab Team
版本: 1.0.0
"""

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import orjson
import pandas as pd

# 添加项目路径到sys.path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from utils.logger import setup_logger, get_logger, log_exception
from utils.config_manager import ConfigInvalid, ConfigManager, load_config_file
from adversary import AdversaryError, survival_table
from leak_analytics import CURVE_KINDS, DomainError, beta_region_table, curve_frame, no_slashing_table, slashing_table
from incentive_game import (
    GameConfig, NeverObedient, StrategyProfile, best_response_check, eventual_obedience_slot,
    simulate_game, sweep_row,
)
from netsim import ScenarioConfig, run as run_scenario


EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2

TABLES = ("slashing", "no-slashing", "beta-region", "survival")


class UnknownTable(Exception):
    """未知的表格或曲线名称"""


def _scenario_job(values: Dict[str, Any]) -> Dict[str, Any]:
    """子进程中执行单个场景，返回摘要"""
    return run_scenario(ScenarioConfig.from_mapping(values)).summary()


def _parse_sweep(text: str) -> Tuple[str, List[Any]]:
    if "=" not in text:
        raise ConfigInvalid(f"扫描参数格式错误 (应为 key=v1,v2,...): {text!r}")
    key, raw = text.split("=", 1)
    values = [v.strip() for v in raw.split(",") if v.strip()]
    if not values:
        raise ConfigInvalid(f"扫描参数没有取值: {text!r}")
    return key.strip(), values


class BeaconLabApp:
    """Beacon Lab 命令执行器"""

    def __init__(self, config: ConfigManager):
        self.config = config
        self._setup_logging()
        self.logger = get_logger(self.__class__.__name__)
        output = config.output_config
        self.out_dir = Path(output['out_dir'])
        self.float_format = output['float_format']
        self.schema = self._load_schema(output['schema_file'])
        self.workers = config.performance_config['max_concurrent_operations']

    def _setup_logging(self) -> None:
        settings = self.config.logging_config
        setup_logger(
            log_level=settings['log_level'],
            log_file=settings['log_file'] or None,
            max_file_size=f"{settings['max_log_size_mb']} MB",
            rotation_count=settings['log_rotation_count'],
            enable_console=settings['enable_console_output'],
        )

    @staticmethod
    def _load_schema(schema_file: str) -> Dict[str, Any]:
        path = Path(schema_file)
        if not path.is_absolute() and not path.exists():
            path = project_root / schema_file
        return orjson.loads(path.read_bytes())

    # ==================== 输出 ====================

    def _target(self, out: Optional[str], default_name: str) -> Path:
        target = Path(out) if out else self.out_dir / default_name
        target.parent.mkdir(parents=True, exist_ok=True)
        return target

    def write_csv(self, frame: pd.DataFrame, target: Path, schema_key: str) -> Path:
        columns = list(self.schema['commands'][schema_key]['columns'])
        if list(frame.columns) != columns:
            raise ValueError(f"{schema_key} 的列与模式文件不一致: {list(frame.columns)}")
        frame.to_csv(target, index=False, float_format=self.float_format)
        self.logger.info(f"已写入 {target} ({len(frame)} 行)")
        return target

    def write_summary(self, target: Path, command: str, payload: Dict[str, Any]) -> Path:
        summary_path = target.with_suffix(".summary.json")
        document = {"schema_version": self.schema['schema_version'], "command": command, **payload}
        summary_path.write_bytes(orjson.dumps(document, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS))
        return summary_path

    # ==================== 子命令 ====================

    @log_exception
    def cmd_simulate(self, out: Optional[str] = None, sweep: Optional[str] = None) -> Path:
        values = self.config.scenario_config
        if sweep:
            return self._simulate_sweep(values, sweep, out)
        scenario = ScenarioConfig.from_mapping(values)
        report = run_scenario(scenario)
        target = self._target(out, "simulate.csv")
        self.write_csv(report.to_frame(), target, "simulate")
        self.write_summary(target, "simulate", {"config": scenario.dict(), "summary": report.summary()})
        return target

    def _simulate_sweep(self, values: Dict[str, Any], sweep: str, out: Optional[str]) -> Path:
        key, raw_values = _parse_sweep(sweep)
        if key not in values:
            raise ConfigInvalid(f"未知场景参数: {key}")
        jobs = [dict(values, **{key: raw}) for raw in raw_values]
        for job in jobs:
            ScenarioConfig.from_mapping(job)
        self.logger.info(f"并行扫描 {key}: {raw_values} (进程数 {self.workers})")
        with ProcessPoolExecutor(max_workers=self.workers) as pool:
            summaries = list(pool.map(_scenario_job, jobs))
        rows = [{"parameter": key, "value": raw, **summary} for raw, summary in zip(raw_values, summaries)]
        frame = pd.DataFrame(rows, columns=list(self.schema['commands']['simulate_sweep']['columns']))
        return self.write_csv(frame, self._target(out, f"simulate_sweep_{key}.csv"), "simulate_sweep")

    def cmd_tables(self, which: str, out: Optional[str] = None) -> Path:
        p0 = self.config.analysis_config['p0']
        if which == "slashing":
            frame = slashing_table(p0)
        elif which == "no-slashing":
            frame = no_slashing_table(p0)
        elif which == "beta-region":
            frame = beta_region_table()
        elif which == "survival":
            frame = survival_table(j=self.config.scenario_config['j'])
        else:
            raise UnknownTable(f"未知表格: {which}，可选: {', '.join(TABLES)}")
        return self.write_csv(frame, self._target(out, f"table_{which}.csv"), f"tables/{which}")

    @log_exception
    def cmd_game(self, out: Optional[str] = None, check_best_response: bool = False,
                 sweep_rho: Optional[Sequence[float]] = None) -> Path:
        game = GameConfig.from_mapping(self.config.game_config)
        profile = StrategyProfile.from_config(game)
        result = simulate_game(game, profile)
        target = self._target(out, "game.csv")
        self.write_csv(result.to_frame(), target, "game")
        try:
            obedience: Optional[int] = eventual_obedience_slot(result)
        except NeverObedient as e:
            self.logger.warning(f"{e}")
            obedience = None
        scenarios = [{"probability": s.probability, "head": s.head} for s in result.scenarios]
        self.write_summary(target, "game", {"config": game.dict(), "eventual_obedience_slot": obedience,
                                            "scenarios": scenarios})

        if check_best_response:
            self.write_csv(self._best_response_frame(game, profile),
                           target.with_name(f"{target.stem}_best_response.csv"), "game/best_response")
        if sweep_rho:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                rows = list(pool.map(sweep_row, [game] * len(sweep_rho), list(sweep_rho)))
            frame = pd.DataFrame(rows, columns=list(self.schema['commands']['game/rho_sweep']['columns']))
            self.write_csv(frame, target.with_name(f"{target.stem}_rho_sweep.csv"), "game/rho_sweep")
        return target

    def _best_response_frame(self, game: GameConfig, profile: StrategyProfile) -> pd.DataFrame:
        rows = []
        players: List[Tuple[int, ...]] = [(k,) for k in range(game.s)]
        players += [(k, i) for k in range(game.s) for i in range(game.a)]
        for player in players:
            verdict = best_response_check(game, profile, player)
            witness = verdict.witness
            rows.append({
                "role": "proposer" if len(player) == 1 else "attester",
                "k": player[0],
                "i": player[1] if len(player) == 2 else None,
                "is_best_response": verdict.is_best_response,
                "payoff": verdict.payoff,
                "witness": getattr(witness, "value", witness),
                "witness_payoff": verdict.witness_payoff,
            })
        return pd.DataFrame(rows)

    def cmd_curves(self, kind: str = "all", out: Optional[str] = None) -> Path:
        kinds = CURVE_KINDS if kind == "all" else (kind,)
        if any(k not in CURVE_KINDS for k in kinds):
            raise UnknownTable(f"未知曲线: {kind}，可选: all, {', '.join(CURVE_KINDS)}")
        analysis = self.config.analysis_config
        frames = []
        for name in kinds:
            frame = curve_frame(name, analysis['curve_horizon'], analysis['curve_step'], analysis['p0'])
            frame.insert(0, "curve", name)
            frames.append(frame)
        return self.write_csv(pd.concat(frames, ignore_index=True), self._target(out, f"curves_{kind}.csv"), "curves")


# ==================== 命令行 ====================

SECTIONS = {"simulate": "SCENARIO", "game": "GAME", "tables": "ANALYSIS", "curves": "ANALYSIS"}
SEED_KEYS = {"SCENARIO": "seed", "GAME": "seed", "ANALYSIS": "mc_seed"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="配置文件路径 (默认: 仓库根目录 config.ini)")
    common.add_argument("--seed", type=int, help="覆盖随机种子")
    common.add_argument("--out", help="输出 CSV 路径")
    common.add_argument("--epochs", type=int, help="覆盖仿真 epoch 数")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="覆盖配置项，可写作 SECTION.key=value，可重复")

    parser = argparse.ArgumentParser(prog="beacon-lab", description="以太坊权益证明共识仿真与分析")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", parents=[common], help="运行网络仿真")
    simulate.add_argument("--sweep", help="并行扫描一个场景参数，例如 beta0=0,0.1,0.2")

    tables = commands.add_parser("tables", parents=[common], help="输出分析表格")
    tables.add_argument("which", help=f"表格名称: {', '.join(TABLES)}")

    game = commands.add_parser("game", parents=[common], help="运行激励博弈")
    game.add_argument("--check-best-response", action="store_true", help="对每个玩家做有界偏离检查")
    game.add_argument("--sweep-rho", type=float, nargs="+", help="ρ 扫描取值")

    curves = commands.add_parser("curves", parents=[common], help="输出泄漏曲线")
    curves.add_argument("kind", nargs="?", default="all", help=f"曲线: all, {', '.join(CURVE_KINDS)}")
    return parser


def load_settings(args: argparse.Namespace) -> ConfigManager:
    config = load_config_file(args.config)
    section = SECTIONS[args.command]
    config.apply_overrides(args.overrides, section)
    if args.seed is not None:
        config.set(section, SEED_KEYS[section], args.seed)
    if args.epochs is not None:
        config.set("SCENARIO", "epochs", args.epochs)
    return config


def main(argv: Optional[Sequence[str]] = None) -> int:
    """命令行主函数，返回退出码"""
    args = build_parser().parse_args(argv)
    try:
        app = BeaconLabApp(load_settings(args))
        if args.command == "simulate":
            target = app.cmd_simulate(args.out, args.sweep)
        elif args.command == "tables":
            target = app.cmd_tables(args.which, args.out)
        elif args.command == "game":
            target = app.cmd_game(args.out, args.check_best_response, args.sweep_rho)
        else:
            target = app.cmd_curves(args.kind, args.out)
    except (ConfigInvalid, DomainError) as e:
        get_logger("main").error(f"配置错误: {e}")
        return EXIT_CONFIG
    except AdversaryError as e:
        get_logger("main").error(f"拜占庭策略无法建立: {e}")
        return EXIT_CONFIG
    except UnknownTable as e:
        get_logger("main").error(f"{e}")
        return EXIT_IO
    except OSError as e:
        get_logger("main").error(f"读写失败: {e}")
        return EXIT_IO
    print(target)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
