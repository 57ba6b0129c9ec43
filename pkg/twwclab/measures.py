"""
单字母信息量：Shannon / Rényi 熵、KL 与 Rényi 相对熵、互信息、
Sibson 型 I↑ / I↓ 以及 Augustin 型（breve）信息量 Ĭ。

所有数值单位为 nats。概率数组中低于 1e-15 的项在计算支撑集前置零。
"""
import logging
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy.special import entr, logsumexp, rel_entr

from twwclab.errors import ConvergenceError, DomainError, ValidationError

logger = logging.getLogger(__name__)

# 分布校验容差
PMF_TOL = 1e-9
# 优化结果的认证容差
CERT_TOL = 1e-8
# 视为精确零的阈值
ZERO_SNAP = 1e-15
# Augustin 不动点迭代的停止条件
BREVE_STEP_TOL = 1e-12
BREVE_MAX_ITER = 10_000
# 阻尼步长减半的最多次数
MAX_HALVINGS = 40

ORDER_PLUS = "1/(1+s)"
ORDER_MINUS = "1/(1-s)"


# ==============================
# 校验工具
# ==============================
def as_pmf(p, name: str = "pmf") -> np.ndarray:
    """校验并返回概率数组（任意形状，整体求和为 1）。"""
    arr = np.array(p, dtype=float)
    if arr.size == 0:
        raise ValidationError(f"{name}: 空分布")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name}: 含有非有限值")
    if np.any(arr < -ZERO_SNAP):
        raise ValidationError(f"{name}: 存在负概率 (min={arr.min():.3e})")
    arr[np.abs(arr) < ZERO_SNAP] = 0.0
    total = arr.sum()
    if abs(total - 1.0) > PMF_TOL:
        raise ValidationError(f"{name}: 概率和为 {total:.12g}，偏离 1 超过 {PMF_TOL}")
    return arr


def as_cond_pmf(w, name: str = "channel") -> np.ndarray:
    """校验条件分布：最后一个轴为输出，其余轴的每个切片都是分布。"""
    arr = np.array(w, dtype=float)
    if arr.ndim < 2:
        raise ValidationError(f"{name}: 条件分布至少需要二维")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name}: 含有非有限值")
    if np.any(arr < -ZERO_SNAP):
        raise ValidationError(f"{name}: 存在负概率")
    arr[np.abs(arr) < ZERO_SNAP] = 0.0
    sums = arr.sum(axis=-1)
    bad = np.argwhere(np.abs(sums - 1.0) > PMF_TOL)
    if bad.size:
        first = tuple(int(i) for i in bad[0])
        raise ValidationError(f"{name}: 条件行 {first} 的和为 {sums[first]:.12g}")
    return arr


def check_order_param(s: float) -> float:
    """s 必须位于 [0, 1]。"""
    s = float(s)
    if not np.isfinite(s) or s < 0.0 or s > 1.0:
        raise DomainError(f"阶数参数 s={s} 不在 [0, 1] 内")
    return s


def _check_order(order: float) -> float:
    order = float(order)
    if not np.isfinite(order) or order <= 0.0:
        raise DomainError(f"Rényi 阶数必须为正: {order}")
    if order == 1.0:
        raise DomainError("阶数为 1 时请使用 Shannon 量")
    return order


def _log(arr: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(arr)


def _lse(a: np.ndarray, axis=None) -> Union[float, np.ndarray]:
    """允许全为 -inf 的 logsumexp。"""
    with np.errstate(divide="ignore", invalid="ignore"):
        return logsumexp(a, axis=axis)


# ==============================
# 熵与散度
# ==============================
def shannon_entropy(p) -> float:
    """H(P) = -Σ p ln p，0·ln0 = 0。"""
    p = as_pmf(p)
    return float(entr(p).sum())


def renyi_entropy(p, order: float) -> float:
    """H_α(P) = ln(Σ p^α) / (1 - α)。"""
    p = as_pmf(p)
    order = _check_order(order)
    support = p[p > 0]
    return float(_lse(order * np.log(support)) / (1.0 - order))


def kl_divergence(p, q) -> float:
    """KL(P‖Q)；支撑集不包含时返回 +inf。"""
    p = as_pmf(p, "p")
    q = as_pmf(q, "q")
    if p.shape != q.shape:
        raise ValidationError(f"形状不一致: {p.shape} vs {q.shape}")
    return float(rel_entr(p, q).sum())


def renyi_relative_entropy(p, q, s: float, with_flag: bool = False) -> Union[float, Tuple[float, bool]]:
    """
    D_{1+s}(P‖Q) = (1/s)·ln Σ p^{1+s} q^{-s}。

    :param s: 阶数偏移，s = 0 时返回 KL 散度。
    :param with_flag: 为 True 时返回 (值, 支撑是否满足)。
    """
    p = as_pmf(p, "p").ravel()
    q = as_pmf(q, "q").ravel()
    if p.shape != q.shape:
        raise ValidationError(f"形状不一致: {p.shape} vs {q.shape}")
    s = float(s)
    if not np.isfinite(s) or s < 0.0:
        raise DomainError(f"s={s} 必须非负")

    mask = p > 0
    support_ok = bool(np.all(q[mask] > 0))
    if not support_ok:
        value = float("inf")
    elif s == 0.0:
        value = float(rel_entr(p, q).sum())
    else:
        terms = (1.0 + s) * np.log(p[mask]) - s * np.log(q[mask])
        value = float(_lse(terms) / s)
    return (value, support_ok) if with_flag else value


# ==============================
# 互信息
# ==============================
def _product_of_marginals(joint: np.ndarray) -> np.ndarray:
    return np.outer(joint.sum(axis=1), joint.sum(axis=0))


def mutual_information(joint) -> float:
    """I(Z;X)，joint 形状为 [z, x]。"""
    joint = as_pmf(joint, "joint")
    if joint.ndim != 2:
        raise ValidationError("joint 必须是二维 [z, x]")
    return max(float(rel_entr(joint, _product_of_marginals(joint)).sum()), 0.0)


def conditional_mutual_information(joint) -> float:
    """I(Z;X|Y)，joint 形状为 [z, x, y]。"""
    joint = as_pmf(joint, "joint")
    if joint.ndim != 3:
        raise ValidationError("joint 必须是三维 [z, x, y]")
    h = lambda arr: float(entr(arr).sum())
    value = h(joint.sum(axis=1)) + h(joint.sum(axis=0)) - h(joint) - h(joint.sum(axis=(0, 1)))
    return max(value, 0.0)


def mi_down(joint, s: float) -> float:
    """I↓_{1+s}(Z;X) = D_{1+s}(P_{ZX} ‖ P_Z × P_X)，joint 形状为 [z, x]。"""
    joint = as_pmf(joint, "joint")
    if joint.ndim != 2:
        raise ValidationError("joint 必须是二维 [z, x]")
    s = check_order_param(s)
    if s == 0.0:
        return mutual_information(joint)
    return max(renyi_relative_entropy(joint, _product_of_marginals(joint), s), 0.0)


def mi_up_conditional(chan, inputs, s: float) -> float:
    """
    I↑_{1/(1+s)}(Z;X|Y) 的闭式：
    e^{-s I↑} = Σ_y P_Y(y) Σ_z (Σ_x P_{X|Y}(x|y) P_{Z|XY}(z|x,y)^{1/(1+s)})^{1+s}

    :param chan: P_{Z|XY}，形状 [x, y, z]。
    :param inputs: P_{XY}，形状 [x, y]。
    """
    w = as_cond_pmf(chan, "P_{Z|XY}")
    p = as_pmf(inputs, "P_{XY}")
    if w.ndim != 3 or p.shape != w.shape[:2]:
        raise ValidationError(f"维度不匹配: chan {w.shape}, inputs {p.shape}")
    s = check_order_param(s)
    if s == 0.0:
        return conditional_mutual_information(np.moveaxis(p[:, :, None] * w, 2, 0))

    py = p.sum(axis=0)
    ys = np.flatnonzero(py > 0)
    log_px_given_y = _log(p[:, ys] / py[ys])                    # [x, y]
    inner = _lse(log_px_given_y[:, :, None] + _log(w[:, ys, :]) / (1.0 + s), axis=0)  # [y, z]
    per_y = _lse((1.0 + s) * inner, axis=1)                     # [y]
    total = _lse(np.log(py[ys]) + per_y)
    return max(float(-total / s), 0.0)


def sibson_mi(chan, input_pmf, order: float) -> float:
    """任意阶 Sibson 互信息 (α/(α-1))·ln Σ_z (Σ_x P(x) W(z|x)^α)^{1/α}。"""
    w = as_cond_pmf(chan, "P_{Z|X}")
    p = as_pmf(input_pmf, "P_X")
    if w.ndim != 2 or p.shape != (w.shape[0],):
        raise ValidationError(f"维度不匹配: chan {w.shape}, input {p.shape}")
    alpha = _check_order(order)
    xs = p > 0
    inner = _lse(np.log(p[xs])[:, None] + alpha * _log(w[xs]), axis=0)
    value = alpha / (alpha - 1.0) * _lse(inner / alpha)
    return max(float(value), 0.0)


def mi_up_unconditional(chan, input_pmf, s: float, sign: str = ORDER_PLUS) -> float:
    """I↑ 的无条件形式，阶数为 1/(1+s) 或 1/(1-s)。"""
    s = check_order_param(s)
    if sign not in (ORDER_PLUS, ORDER_MINUS):
        raise DomainError(f"未知阶数形式: {sign}")
    if sign == ORDER_MINUS and s == 1.0:
        raise DomainError("s = 1 时阶数 1/(1-s) 无定义")
    if s == 0.0:
        w = as_cond_pmf(chan, "P_{Z|X}")
        p = as_pmf(input_pmf, "P_X")
        return mutual_information((p[:, None] * w).T)
    alpha = 1.0 / (1.0 + s) if sign == ORDER_PLUS else 1.0 / (1.0 - s)
    return sibson_mi(chan, input_pmf, alpha)


# ==============================
# Augustin 型信息量
# ==============================
class AugustinResult(NamedTuple):
    value: float
    q: np.ndarray
    iterations: int
    residual: float


def augustin_mean(chan, input_pmf, order: float,
                  max_iter: int = BREVE_MAX_ITER, step_tol: float = BREVE_STEP_TOL) -> AugustinResult:
    """
    min_Q Σ_x P(x) D_α(P_{Z|X=x} ‖ Q) 及其最优 Q（Augustin 均值）。

    不动点映射 T(Q)(z) = Σ_x P(x) W_x(z)^α Q(z)^{1-α} / Σ_z' W_x(z')^α Q(z')^{1-α}，
    从输出边缘出发；方向 T(Q)-Q 是下降方向，目标增加时步长减半。
    """
    w = as_cond_pmf(chan, "P_{Z|X}")
    p = as_pmf(input_pmf, "P_X")
    if w.ndim != 2 or p.shape != (w.shape[0],):
        raise ValidationError(f"维度不匹配: chan {w.shape}, input {p.shape}")
    alpha = _check_order(order)

    xs = p > 0
    px = p[xs]
    wx = w[xs]
    zs = np.flatnonzero(wx.sum(axis=0) > 0)
    wx = wx[:, zs]
    log_w = _log(wx)

    def embed(q_sub: np.ndarray) -> np.ndarray:
        full = np.zeros(w.shape[1])
        full[zs] = q_sub
        return full

    if zs.size == 1:
        return AugustinResult(0.0, embed(np.ones(1)), 0, 0.0)

    def tilt(q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        a = alpha * log_w + (1.0 - alpha) * _log(q)[None, :]
        norm = _lse(a, axis=1)
        return a, norm

    def objective(q: np.ndarray) -> float:
        _, norm = tilt(q)
        return float(np.dot(px, norm) / (alpha - 1.0))

    def fixed_point(q: np.ndarray) -> np.ndarray:
        a, norm = tilt(q)
        with np.errstate(invalid="ignore"):
            tilted = np.exp(a - norm[:, None])
        tilted = np.nan_to_num(tilted)
        return px @ tilted

    q = px @ wx
    value = objective(q)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        direction = fixed_point(q) - q
        step = 1.0
        candidate = q + direction
        cand_value = objective(candidate)
        halvings = 0
        while cand_value > value + 1e-15 * max(1.0, abs(value)) and halvings < MAX_HALVINGS:
            step *= 0.5
            halvings += 1
            candidate = q + step * direction
            cand_value = objective(candidate)
        if cand_value > value + 1e-15 * max(1.0, abs(value)):
            logger.debug("线搜索未能下降，保留当前迭代", extra={"extra_data": {"order": alpha, "iteration": it}})
            break
        candidate = np.clip(candidate, 0.0, None)
        candidate /= candidate.sum()
        tv = 0.5 * float(np.abs(candidate - q).sum())
        q, value = candidate, objective(candidate)
        if tv < step_tol:
            converged = True
            break

    residual = 0.5 * float(np.abs(fixed_point(q) - q).sum())
    value = max(value, 0.0)
    if residual > CERT_TOL:
        logger.error("Augustin 迭代未收敛", extra={"extra_data": {"order": alpha, "residual": residual, "iterations": it}})
        raise ConvergenceError(f"Augustin 迭代在 {it} 次后未满足驻点条件 (order={alpha})", value, residual)
    if not converged:
        logger.warning(f"⚠️ Augustin 迭代达到上限 {max_iter}，残差 {residual:.2e} 已满足认证容差")
    return AugustinResult(value, embed(q), it, residual)


def breve_mi(chan, input_pmf, order: float) -> float:
    """Ĭ_α(Z;X) = min_Q Σ_x P(x) D_α(P_{Z|X=x} ‖ Q)。"""
    return augustin_mean(chan, input_pmf, order).value


def _independent_marginals(inputs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    px = inputs.sum(axis=1)
    py = inputs.sum(axis=0)
    if np.max(np.abs(inputs - np.outer(px, py))) > PMF_TOL:
        raise ValidationError("条件 breve 量要求 X 与 Y 独立")
    return px, py


def breve_mi_conditional(chan, inputs, order: float, method: str = "joint") -> float:
    """
    条件 breve 量 Ĭ_α(Z;X|Y)，要求 X ⟂ Y。

    method="joint"：联合输出形式 Ĭ_α(ZY;X)，信道为 P_Y(y)·P_{Z|XY}。
    method="per_y"：逐 y 最小化后做指数平均
        (α/(α-1))·ln Σ_y P_Y(y) exp(((α-1)/α)·m_y)。

    :param chan: P_{Z|XY}，形状 [x, y, z]。
    :param inputs: P_{XY}，形状 [x, y]。
    """
    w = as_cond_pmf(chan, "P_{Z|XY}")
    p = as_pmf(inputs, "P_{XY}")
    if w.ndim != 3 or p.shape != w.shape[:2]:
        raise ValidationError(f"维度不匹配: chan {w.shape}, inputs {p.shape}")
    alpha = _check_order(order)
    px, py = _independent_marginals(p)

    if method == "joint":
        joint_out = (py[None, :, None] * w).reshape(w.shape[0], -1)
        return breve_mi(joint_out, px, alpha)
    if method == "per_y":
        ys = np.flatnonzero(py > 0)
        minima = np.array([breve_mi(w[:, y, :], px, alpha) for y in ys])
        c = (alpha - 1.0) / alpha
        return max(float(_lse(np.log(py[ys]) + c * minima) / c), 0.0)
    raise ValidationError(f"未知的条件 breve 计算方式: {method}")
