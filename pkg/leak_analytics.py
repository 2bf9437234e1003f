"""
不活跃泄漏分析 - Beacon Lab
==========================

不活跃分数/罚金递推、权益闭式曲线、活跃比例曲线、重新最终确定时间求解、
β 超过 1/3 的区域，以及随机游走/对数正态权益分布。

主要功能:
1. step_inactivity / apply_penalty / process_leak_epoch: 离散递推 (仿真器直接使用)
2. stake_curve: Active / SemiActive / Inactive 三种闭式权益曲线
3. honest_active_ratio / semi_active_ratio 及其重新最终确定时间
4. beta_max / beta_threshold: 半活跃拜占庭比例上限与 1/3 边界
5. score_density / stake_pdf / stake_cdf / censored_cdf: 分数与权益分布
6. discrete_score_pmf / simulate_stake_walks: 两条交替随机游走的离散卷积与蒙特卡洛样本
7. 表格与曲线 (pandas DataFrame)

作者: Beacon Lab Team
版本: 1.0.0
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import integrate, optimize, special, stats

from chain import ValidatorRegistry, EJECTION_BALANCE, MAX_EFFECTIVE_BALANCE
from utils.logger import get_logger, log_performance


INACTIVITY_SCORE_BIAS = 4
INACTIVITY_SCORE_RECOVERY_RATE = 16
INACTIVITY_PENALTY_QUOTIENT = 2 ** 26
MIN_EPOCHS_TO_INACTIVITY_PENALTY = 4

# 闭式曲线使用的弹出时间常数
EJECTION_EPOCH_INACTIVE = 4685
EJECTION_EPOCH_SEMI_ACTIVE = 7652

DRIFT_V = 1.5
STAKE_LOWER = EJECTION_BALANCE
STAKE_UPPER = MAX_EFFECTIVE_BALANCE
SUPERMAJORITY = 2.0 / 3.0

_logger = get_logger("leak_analytics")


class LeakAnalyticsError(Exception):
    """泄漏分析错误基类"""


class DomainError(LeakAnalyticsError, ValueError):
    """参数超出定义域"""


class Behavior(str, Enum):
    ACTIVE = "active"
    SEMI_ACTIVE = "semi_active"
    INACTIVE = "inactive"


class RefinalizeMode(str, Enum):
    HONEST_ONLY = "honest_only"
    SLASHING = "slashing"


# ==================== 离散递推 ====================

@dataclass
class LeakState:
    """单个视图的泄漏状态"""
    leak_active: bool = False
    epochs_without_finalization: int = 0

    def update(self, previous_epoch: int, finalized_epoch: int) -> bool:
        self.epochs_without_finalization = max(0, previous_epoch - finalized_epoch)
        self.leak_active = self.epochs_without_finalization >= MIN_EPOCHS_TO_INACTIVITY_PENALTY
        return self.leak_active


def step_inactivity(score: int, active: bool, in_leak: bool) -> int:
    """单个 epoch 的不活跃分数更新"""
    if score < 0:
        raise DomainError(f"不活跃分数不能为负: {score}")
    score = max(score - 1, 0) if active else score + INACTIVITY_SCORE_BIAS
    if not in_leak:
        score = max(score - INACTIVITY_SCORE_RECOVERY_RATE, 0)
    return score


def apply_penalty(stake: float, score: int) -> float:
    """stake - score * stake / 2^26"""
    if stake < 0:
        raise DomainError(f"权益不能为负: {stake}")
    return stake - score * stake / INACTIVITY_PENALTY_QUOTIENT


def process_leak_epoch(registry: ValidatorRegistry, participants: Iterable[int],
                       state: LeakState) -> List[int]:
    """对注册表中仍活跃的验证者更新分数与权益，返回本 epoch 被弹出的验证者"""
    participating = set(participants)
    ejected = []
    for record in registry:
        if not record.active_flag:
            continue
        record.inactivity_score = step_inactivity(record.inactivity_score, record.id in participating, state.leak_active)
        if record.inactivity_score:
            record.stake = apply_penalty(record.stake, record.inactivity_score)
        if record.stake < EJECTION_BALANCE:
            record.eject()
            ejected.append(record.id)
    return ejected


def activity_pattern(behavior: Behavior, t: int) -> bool:
    """泄漏第 t 个 epoch (从 1 开始) 是否活跃；半活跃从不活跃开始交替"""
    if behavior == Behavior.ACTIVE:
        return True
    if behavior == Behavior.INACTIVE:
        return False
    return t % 2 == 0


def recursion_trajectory(behavior: Behavior, epochs: int, s0: float = MAX_EFFECTIVE_BALANCE) -> np.ndarray:
    """按离散递推得到的权益轨迹 (不弹出)，下标 t=0..epochs"""
    stakes = np.empty(epochs + 1)
    stakes[0] = s0
    score, stake = 0, s0
    for t in range(1, epochs + 1):
        score = step_inactivity(score, activity_pattern(behavior, t), in_leak=True)
        stake = apply_penalty(stake, score)
        stakes[t] = stake
    return stakes


def recursion_ejection_epoch(behavior: Behavior, limit: int = 20000) -> Optional[int]:
    """离散递推首次跌破 16.75 的 epoch"""
    score, stake = 0, MAX_EFFECTIVE_BALANCE
    for t in range(1, limit + 1):
        score = step_inactivity(score, activity_pattern(behavior, t), in_leak=True)
        stake = apply_penalty(stake, score)
        if stake < EJECTION_BALANCE:
            return t
    return None


# ==================== 闭式曲线 ====================

def stake_curve(behavior: Behavior, t: float, s0: float = MAX_EFFECTIVE_BALANCE,
                with_ejection: bool = True) -> float:
    """闭式权益曲线；弹出后返回 0"""
    if t < 0:
        raise DomainError(f"时间不能为负: {t}")
    behavior = Behavior(behavior)
    if behavior == Behavior.ACTIVE:
        return s0
    if behavior == Behavior.INACTIVE:
        if with_ejection and t >= EJECTION_EPOCH_INACTIVE:
            return 0.0
        return s0 * math.exp(-t * t / 2 ** 25)
    if with_ejection and t >= EJECTION_EPOCH_SEMI_ACTIVE:
        return 0.0
    return s0 * math.exp(-3 * t * t / 2 ** 28)


def _inactive_factor(t: float) -> float:
    return math.exp(-t * t / 2 ** 25)


def _semi_active_factor(t: float) -> float:
    return math.exp(-3 * t * t / 2 ** 28)


def _check_p0(p0: float) -> None:
    if not 0 < p0 < 1:
        raise DomainError(f"p0 必须在 (0, 1) 内: {p0}")


def _check_beta0(beta0: float) -> None:
    if not 0 <= beta0 < 1:
        raise DomainError(f"beta0 必须在 [0, 1) 内: {beta0}")


def honest_active_ratio(p0: float, t: float) -> float:
    """分区内诚实活跃权益占比 p0 / (p0 + (1-p0) e^{-t^2/2^25})"""
    _check_p0(p0)
    if t < 0:
        raise DomainError(f"时间不能为负: {t}")
    if p0 <= 0.5 and t >= EJECTION_EPOCH_INACTIVE:
        return 1.0
    return p0 / (p0 + (1 - p0) * _inactive_factor(t))


def time_to_refinalize(p0: float, beta0: float = 0.0,
                       mode: RefinalizeMode = RefinalizeMode.SLASHING) -> float:
    """活跃比例恢复到 2/3 所需的 epoch 数 (上限 4685)"""
    _check_p0(p0)
    _check_beta0(beta0)
    if RefinalizeMode(mode) == RefinalizeMode.HONEST_ONLY:
        beta0 = 0.0
    inner = p0 + beta0 / (1 - beta0)
    if 1 - p0 <= 0 or inner <= 0:
        raise DomainError(f"对数参数非正: p0={p0}, beta0={beta0}")
    exponent = math.log(2 * (1 - p0)) - math.log(inner)
    if exponent <= 0:
        return 0.0
    return min(math.sqrt(2 ** 25 * exponent), float(EJECTION_EPOCH_INACTIVE))


def semi_active_ratio(p0: float, beta0: float, t: float) -> float:
    """半活跃拜占庭所在分支的活跃权益占比"""
    _check_p0(p0)
    _check_beta0(beta0)
    active = p0 * (1 - beta0) + beta0 * _semi_active_factor(t)
    return active / (active + (1 - p0) * (1 - beta0) * _inactive_factor(t))


def time_to_refinalize_semiactive(p0: float, beta0: float, tol: float = 1e-3) -> float:
    """semi_active_ratio 首次达到 2/3 的时间 (二分)，无根时返回上限 4685"""
    cap = float(EJECTION_EPOCH_INACTIVE)
    gap = lambda t: semi_active_ratio(p0, beta0, t) - SUPERMAJORITY
    if gap(0.0) >= 0:
        return 0.0
    if gap(cap) < 0:
        _logger.debug(f"半活跃比例在上限前未达到 2/3: p0={p0}, beta0={beta0}")
        return cap
    return optimize.bisect(gap, 0.0, cap, xtol=tol)


def beta_max(p0: float, beta0: float) -> float:
    """半活跃拜占庭在诚实不活跃者弹出时刻能达到的最大比例"""
    _check_p0(p0)
    _check_beta0(beta0)
    byz = beta0 * _semi_active_factor(EJECTION_EPOCH_INACTIVE)
    return byz / (p0 * (1 - beta0) + byz)


def beta_exceeds_third(p0: float, beta0: float) -> bool:
    return beta_max(p0, beta0) >= 1.0 / 3.0


def beta_threshold(p0: float) -> float:
    """使 beta_max = 1/3 的最小 beta0"""
    _check_p0(p0)
    e_b = _semi_active_factor(EJECTION_EPOCH_INACTIVE)
    return p0 / (2 * e_b + p0)


def byzantine_proportion(beta0: float, byzantine_stake: float, honest_stake: float) -> float:
    """β(t) = β0·sB / (β0·sB + (1-β0)·sH)"""
    _check_beta0(beta0)
    denominator = beta0 * byzantine_stake + (1 - beta0) * honest_stake
    return 0.0 if denominator == 0 else beta0 * byzantine_stake / denominator


def bouncing_window(p0: float, beta0: float) -> bool:
    """弹跳攻击可建立的诚实分区比例区间"""
    _check_beta0(beta0)
    return (2 - 3 * beta0) / (3 * (1 - beta0)) < p0 < 2 / (3 * (1 - beta0))


# ==================== 随机游走与分布 ====================

def diffusion_coefficient(p0: float) -> float:
    """D = 25·p0·(1-p0)"""
    _check_p0(p0)
    return 25.0 * p0 * (1 - p0)


def walk_diffusion(p0: float) -> float:
    """交替游走每个 epoch 方差为 25·p0·(1-p0)，对应 2·D·t 记法下的 D"""
    return diffusion_coefficient(p0) / 2.0


def _diffusion(p0: float, diffusion: Optional[float]) -> float:
    value = diffusion_coefficient(p0) if diffusion is None else diffusion
    if value <= 0:
        raise DomainError(f"扩散系数必须为正: {value}")
    return value


def score_density(score: float, t: float, p0: float, diffusion: Optional[float] = None) -> float:
    """分数在 t 时刻的高斯密度，均值 V·t，方差 2·D·t"""
    if t <= 0:
        raise DomainError(f"t 必须为正: {t}")
    d = _diffusion(p0, diffusion)
    return stats.norm.pdf(score, loc=DRIFT_V * t, scale=math.sqrt(2 * d * t))


def _log_coordinate(s, t: float):
    return INACTIVITY_PENALTY_QUOTIENT * np.log(np.asarray(s, dtype=float) / MAX_EFFECTIVE_BALANCE) + DRIFT_V * t * t / 2


def stake_cdf(s, t: float, p0: float, diffusion: Optional[float] = None):
    """未截断的对数正态权益累积分布 F(s, t)"""
    if t <= 0:
        raise DomainError(f"t 必须为正: {t}")
    d = _diffusion(p0, diffusion)
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0):
        raise DomainError("权益必须为正")
    value = 0.5 + 0.5 * special.erf(_log_coordinate(s_arr, t) / math.sqrt(4.0 / 3.0 * d * t ** 3))
    return float(value) if np.ndim(value) == 0 else value


def stake_pdf(s, t: float, p0: float, diffusion: Optional[float] = None):
    """未截断的对数正态权益密度 P(s, t)"""
    if t <= 0:
        raise DomainError(f"t 必须为正: {t}")
    d = _diffusion(p0, diffusion)
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0):
        raise DomainError("权益必须为正")
    spread = 4.0 / 3.0 * d * t ** 3
    value = (INACTIVITY_PENALTY_QUOTIENT / (s_arr * math.sqrt(math.pi * spread))
             * np.exp(-_log_coordinate(s_arr, t) ** 2 / spread))
    return float(value) if np.ndim(value) == 0 else value


def censored_cdf(x, t: float, p0: float, diffusion: Optional[float] = None):
    """截断权益分布的累积函数: 低于 16.75 的质量集中在 0，高于 32 的集中在 32"""
    x_arr = np.asarray(x, dtype=float)
    f_a = stake_cdf(STAKE_LOWER, t, p0, diffusion)
    inside = np.clip(x_arr, STAKE_LOWER, STAKE_UPPER)
    f_x = np.asarray(stake_cdf(inside, t, p0, diffusion))
    value = np.where(x_arr < STAKE_LOWER, f_a, f_x)
    value = np.where(x_arr >= STAKE_UPPER, 1.0, value)
    value = np.where(x_arr < 0, 0.0, value)
    return float(value) if np.ndim(value) == 0 else value


def censored_masses(t: float, p0: float, diffusion: Optional[float] = None) -> Tuple[float, float, float]:
    """(弹出质量, (a, b) 上的连续质量, 上限质量)"""
    mass_ejected = stake_cdf(STAKE_LOWER, t, p0, diffusion)
    continuous, _ = integrate.quad(lambda s: stake_pdf(s, t, p0, diffusion), STAKE_LOWER, STAKE_UPPER,
                                   epsabs=1e-12, epsrel=1e-10, limit=200)
    mass_cap = 1.0 - stake_cdf(STAKE_UPPER, t, p0, diffusion)
    return mass_ejected, continuous, mass_cap


def prob_beta_exceeds_third(beta0: float, t: float, p0: float, diffusion: Optional[float] = None) -> float:
    """诚实权益低于 (2β0/(1-β0))·sB(t) 的概率，即 β(t) > 1/3 的概率"""
    _check_beta0(beta0)
    threshold = 2 * beta0 / (1 - beta0) * stake_curve(Behavior.SEMI_ACTIVE, t, with_ejection=False)
    return censored_cdf(threshold, t, p0, diffusion)


def markov_score_step(p0: float) -> Dict[int, float]:
    """两个 epoch 内分数增量的分布"""
    _check_p0(p0)
    cross = p0 * (1 - p0)
    return {8: cross, 3: p0 ** 2 + (1 - p0) ** 2, -2: cross}


def convolution_probability(s: int, n: int, p0: float) -> float:
    """两条游走各走 n 步后共出现 s 次 +4 的概率

    Σ_k C(n,k)·C(n,s-k)·p0^(n+2k-s)·(1-p0)^(n+s-2k)，在对数空间求和。
    """
    _check_p0(p0)
    if not 0 <= s <= 2 * n:
        return 0.0
    ks = np.arange(max(0, s - n), min(n, s) + 1)
    log_terms = (special.gammaln(n + 1) * 2
                 - special.gammaln(ks + 1) - special.gammaln(n - ks + 1)
                 - special.gammaln(s - ks + 1) - special.gammaln(n - s + ks + 1)
                 + (n + 2 * ks - s) * math.log(p0) + (n + s - 2 * ks) * math.log(1 - p0))
    return float(np.exp(special.logsumexp(log_terms)))


def discrete_score_pmf(n: int, p0: float) -> Tuple[np.ndarray, np.ndarray]:
    """2n 个 epoch 后分数的离散分布 (分数 = 5s - 2n)"""
    _check_p0(p0)
    x_pmf = stats.binom.pmf(np.arange(n + 1), n, p0)
    y_pmf = stats.binom.pmf(np.arange(n + 1), n, 1 - p0)
    probs = np.convolve(x_pmf, y_pmf)
    scores = 5 * np.arange(2 * n + 1) - 2 * n
    return scores, probs


def simulate_score_walks(p0: float, epochs: int, walkers: int, rng: np.random.Generator) -> np.ndarray:
    """交替游走的分数样本: 偶数 epoch 以 p0 概率 +4，奇数 epoch 以 1-p0 概率 +4，否则 -1"""
    scores = np.zeros(walkers, dtype=np.int64)
    for t in range(epochs):
        up_prob = p0 if t % 2 == 0 else 1 - p0
        scores += np.where(rng.random(walkers) < up_prob, INACTIVITY_SCORE_BIAS, -1)
    return scores


@log_performance
def simulate_stake_walks(p0: float, times: Sequence[int], walkers: int, seed: int) -> Dict[int, np.ndarray]:
    """蒙特卡洛: 随机游走分数驱动的截断权益样本 (分数允许为负)"""
    rng = np.random.default_rng(seed)
    scores = np.zeros(walkers, dtype=np.float64)
    log_stake = np.full(walkers, math.log(MAX_EFFECTIVE_BALANCE))
    ejected = np.zeros(walkers, dtype=bool)
    log_lower = math.log(STAKE_LOWER)
    wanted = set(times)
    samples: Dict[int, np.ndarray] = {}
    for t in range(1, max(times) + 1):
        up_prob = p0 if t % 2 == 1 else 1 - p0
        scores += np.where(rng.random(walkers) < up_prob, INACTIVITY_SCORE_BIAS, -1)
        log_stake += np.log1p(-scores / INACTIVITY_PENALTY_QUOTIENT)
        ejected |= log_stake < log_lower
        if t in wanted:
            stake = np.minimum(np.exp(log_stake), MAX_EFFECTIVE_BALANCE)
            samples[t] = np.where(ejected, 0.0, stake)
    return samples


# ==================== 表格与曲线 ====================

SLASHING_BETAS = (0.0, 0.1, 0.15, 0.2, 0.33)


def slashing_table(p0: float = 0.5, betas: Sequence[float] = SLASHING_BETAS) -> pd.DataFrame:
    rows = [{"p0": p0, "beta0": b, "epochs": math.ceil(time_to_refinalize(p0, b))} for b in betas]
    return pd.DataFrame(rows, columns=["p0", "beta0", "epochs"])


def no_slashing_table(p0: float = 0.5, betas: Sequence[float] = SLASHING_BETAS) -> pd.DataFrame:
    rows = []
    for b in betas:
        raw = time_to_refinalize_semiactive(p0, b)
        rows.append({"p0": p0, "beta0": b, "raw_epochs": raw, "epochs": math.ceil(raw)})
    return pd.DataFrame(rows, columns=["p0", "beta0", "raw_epochs", "epochs"])


def beta_region_table(p0_grid: Optional[Sequence[float]] = None) -> pd.DataFrame:
    grid = p0_grid if p0_grid is not None else np.round(np.arange(0.05, 1.0, 0.05), 2)
    rows = [{"p0": float(p), "beta0_min": beta_threshold(float(p))} for p in grid]
    return pd.DataFrame(rows, columns=["p0", "beta0_min"])


def curve_frame(kind: str, horizon: int = 8000, step: int = 50, p0: float = 0.5,
                beta0: float = 1.0 / 3.0) -> pd.DataFrame:
    """曲线数据 (series, t, value)

    kind: honest_ratio / stake / beta_over_time / beta_exceeds_third
    """
    ts = np.arange(0, horizon + 1, step, dtype=float)
    rows = []
    if kind == "honest_ratio":
        for p in (0.3, 0.4, 0.5, 0.6):
            rows += [(f"p0={p}", t, honest_active_ratio(p, t)) for t in ts]
    elif kind == "stake":
        for behavior in Behavior:
            rows += [(behavior.value, t, stake_curve(behavior, t)) for t in ts]
    elif kind == "beta_over_time":
        for b in (0.1, 0.2, 0.3, beta0):
            rows += [(f"beta0={b:.4g}", t, byzantine_proportion(
                b, stake_curve(Behavior.SEMI_ACTIVE, t), stake_curve(Behavior.INACTIVE, t, with_ejection=False)))
                for t in ts]
    elif kind == "beta_exceeds_third":
        for b in (0.2, 0.25, 0.3, beta0):
            rows += [(f"beta0={b:.4g}", t, prob_beta_exceeds_third(b, t, p0)) for t in ts if t > 0]
    else:
        raise DomainError(f"未知曲线: {kind}")
    return pd.DataFrame(rows, columns=["series", "t", "value"])


CURVE_KINDS = ("honest_ratio", "stake", "beta_over_time", "beta_exceeds_third")


if __name__ == "__main__":
    print(slashing_table())
    print(no_slashing_table())
    print("beta0 边界 (p0=0.5):", round(beta_threshold(0.5), 4))
    print("离散递推弹出 epoch:", recursion_ejection_epoch(Behavior.INACTIVE), recursion_ejection_epoch(Behavior.SEMI_ACTIVE))
