"""
实验室统一异常定义。

库函数只抛出异常，退出码的映射由 cli 负责：
ValueError 家族 -> 2，SizingError -> 3，其余 -> 1。
"""
from typing import Optional


class TwwcError(Exception):
    """所有实验室异常的基类。"""


class ValidationError(TwwcError, ValueError):
    """输入不满足不变量（概率分布、信道张量、规格文件等）。"""


class DomainError(ValidationError):
    """阶数参数越界，例如 order = 1 或 s = 1 时使用 1/(1-s)。"""


class MarginalMismatchError(ValidationError):
    """序列的经验型与联合型的边缘不一致。"""


class BudgetError(ValidationError):
    """时分方案违反总成本预算。"""


class SizingError(TwwcError):
    """枚举或张量规模超过上限。"""

    def __init__(self, message: str, requested: Optional[int] = None, limit: Optional[int] = None):
        super().__init__(message)
        self.requested = requested
        self.limit = limit


class ConvergenceError(TwwcError):
    """迭代在上限内未收敛，携带当前最优值与残差。"""

    def __init__(self, message: str, best_value: float, residual: float):
        super().__init__(f"{message} (best={best_value:.12g}, residual={residual:.3e})")
        self.best_value = best_value
        self.residual = residual


def check_size(requested: int, limit: int, what: str) -> None:
    """规模守卫：超过上限时抛出 SizingError。"""
    if requested > limit:
        raise SizingError(f"{what} 规模 {requested} 超过上限 {limit}", requested=requested, limit=limit)
