"""
有限码长下的译码错误与信息泄露上界：i.i.d. 随机码、常组成码（带 ν 因子）、
加性信道闭式特化，以及阶数参数 s 的逐指标优化。

所有界在对数域中组装，指数和用 logsumexp 计算。
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, validator
from scipy.special import logsumexp

from twwclab.channel import AdditiveChannelSpec, ChannelTensor, JointInputLaw, compose_effective
from twwclab.config import config_manager
from twwclab.errors import DomainError, ValidationError
from twwclab.measures import (
    breve_mi,
    breve_mi_conditional,
    check_order_param,
    mi_down,
    mi_up_conditional,
    renyi_entropy,
)
from twwclab.polytope import Inequality, LinearSystem, fourier_motzkin, halfspace_vertices, reduce_system
from twwclab.regions import rate_constraint_system, secrecy_terms, terms_as_parameters
from twwclab.runner import runner
from twwclab.typelib import JointType, count_types, nu_bound, log_nu_exact

logger = logging.getLogger(__name__)

METRICS = ("err", "leak_joint", "leak_m1", "leak_m2")


class RateTuple(BaseModel):
    """消息速率 R1, R2 与本地随机化速率 r1, r2（nats/次）。"""
    R1: float
    R2: float
    r1: float = 0.0
    r2: float = 0.0

    class Config:
        allow_mutation = False

    @validator("R1", "R2", "r1", "r2")
    def _nonnegative(cls, v):
        if not np.isfinite(v) or v < 0:
            raise ValueError(f"速率必须非负且有限: {v}")
        return float(v)


class ExponentRow(NamedTuple):
    s: float
    err: float
    leak_joint: float
    leak_m1: float
    leak_m2: float


@dataclass
class ExponentReport:
    n: int
    rates: RateTuple
    rows: List[ExponentRow]
    meta: Dict[str, Any] = field(default_factory=dict)

    def thresholds(self) -> Dict[str, float]:
        """无信息阈值：任一上界 ≥ 1 即视为空洞。"""
        return {m: 1.0 for m in METRICS}

    def entropy_limits(self) -> Dict[str, float]:
        """泄露的平凡上限 n·R（消息总熵），仅作参考输出。"""
        r = self.rates
        return {"leak_joint": self.n * (r.R1 + r.R2), "leak_m1": self.n * r.R1, "leak_m2": self.n * r.R2}

    def best(self) -> Dict[str, ExponentRow]:
        return {m: min(self.rows, key=lambda row: (getattr(row, m), row.s)) for m in METRICS}

    def vacuous(self) -> Dict[str, bool]:
        limits = self.thresholds()
        return {m: bool(getattr(row, m) >= limits[m]) for m, row in self.best().items()}

    def to_dict(self) -> Dict[str, Any]:
        best = self.best()
        return {
            "n": self.n,
            "rates": self.rates.dict(),
            "rows": [row._asdict() for row in self.rows],
            "best": {m: {"s": row.s, "value": getattr(row, m)} for m, row in best.items()},
            "vacuous": self.vacuous(),
            "entropy_limits": self.entropy_limits(),
            "meta": dict(self.meta),
        }

    csv_header = list(ExponentRow._fields)

    def csv_rows(self) -> List[List[float]]:
        return [list(row) for row in self.rows]


# ==============================
# s 网格
# ==============================
def default_s_grid(size: Optional[int] = None, open_right: bool = False) -> np.ndarray:
    """
    k/size (k=1..size)，即 (0,1] 上的等距点；open_right 时取 k/(size+1)，不含 s=1。
    """
    size = size or config_manager.config.S_GRID_SIZE
    if size < 1:
        raise ValidationError(f"s 网格大小必须为正: {size}")
    denom = size + 1 if open_right else size
    return np.arange(1, size + 1) / denom


def _check_grid(s_grid: Sequence[float], open_right: bool = False) -> List[float]:
    grid = [check_order_param(s) for s in s_grid]
    if not grid:
        raise ValidationError("s 网格不能为空")
    if any(s == 0.0 for s in grid):
        raise DomainError("s 网格必须位于 (0, 1]")
    if open_right and any(s >= 1.0 for s in grid):
        raise DomainError("阶数 1/(1-s) 要求 s < 1")
    return grid


# ==============================
# 组装
# ==============================
class _Terms(NamedTuple):
    """单个 s 下的五个信息量：两条错误指数项与三条泄露项。"""
    up1: float      # 译码 V1（接收者 2）
    up2: float      # 译码 V2（接收者 1）
    z1: float
    z2: float
    z12: float


def _exp(log_value: float) -> float:
    with np.errstate(over="ignore"):
        return float(np.exp(log_value))


def _assemble(s: float, n: int, rates: RateTuple, q: _Terms, ensemble: bool,
              log_err_factor: float = 0.0, log_leak_factor: float = 0.0) -> ExponentRow:
    """对数域组装一行；ensemble 时去掉 2/3 前因子。"""
    ns = n * s
    R1, R2, r1, r2 = rates.R1, rates.R2, rates.r1, rates.r2
    c2 = 0.0 if ensemble else math.log(2.0)
    c3 = 0.0 if ensemble else math.log(3.0)

    err = c2 + log_err_factor + logsumexp([ns * (R1 + r1 - q.up1), ns * (R2 + r2 - q.up2)])
    joint = c2 + log_leak_factor + logsumexp([ns * (q.z1 - r1), ns * (q.z2 - r2), ns * (q.z12 - r1 - r2)])
    m1 = c3 + log_leak_factor + logsumexp([ns * (q.z12 - r1 - r2 - R2), ns * (q.z1 - r1), ns * (q.z2 - r2 - R2)])
    m2 = c3 + log_leak_factor + logsumexp([ns * (q.z12 - r1 - r2 - R1), ns * (q.z2 - r2), ns * (q.z1 - r1 - R1)])
    return ExponentRow(float(s), _exp(err), _exp(joint), _exp(m1), _exp(m2))


def _finish(n: int, rates: RateTuple, rows: List[ExponentRow], meta: Dict[str, Any]) -> ExponentReport:
    report = ExponentReport(n=n, rates=rates, rows=rows, meta=meta)
    vac = report.vacuous()
    if all(vac.values()):
        logger.warning("⚠️ 所有指标的界在整个 s 网格上都是平凡的")
    logger.info(f"✅ 指数界计算完成 ({meta.get('mode')})", extra={"extra_data": {
        "n": n, "grid": len(rows), "vacuous": vac}})
    return report


def _check_n(n: int) -> int:
    if int(n) != n or n < 1:
        raise ValidationError(f"码长 n 必须为正整数: {n}")
    return int(n)


# ==============================
# i.i.d. 随机码
# ==============================
def bounds_iid(t: ChannelTensor, law: JointInputLaw, rates: RateTuple, n: int,
               s_grid: Optional[Sequence[float]] = None, ensemble: bool = False) -> ExponentReport:
    """
    i.i.d. 随机码的错误与泄露上界（逐 s 一行），错误项使用 I↑_{1/(1+s)}，泄露项使用 I↓_{1+s}。
    """
    n = _check_n(n)
    grid = _check_grid(default_s_grid() if s_grid is None else s_grid)
    joint = compose_effective(t, law)
    ch1, in1 = joint.conditional_channel(("y2",), ("v1", "x2"))
    ch2, in2 = joint.conditional_channel(("y1",), ("v2", "x1"))
    z_v1 = joint.marginal("z", "v1")
    z_v2 = joint.marginal("z", "v2")
    z_v1v2 = joint.marginal("z", "v1", "v2")
    z_v1v2 = z_v1v2.reshape(z_v1v2.shape[0], -1)

    def row(s: float) -> ExponentRow:
        q = _Terms(
            up1=mi_up_conditional(ch1, in1, s),
            up2=mi_up_conditional(ch2, in2, s),
            z1=mi_down(z_v1, s),
            z2=mi_down(z_v2, s),
            z12=mi_down(z_v1v2, s),
        )
        return _assemble(s, n, rates, q, ensemble)

    rows = runner.map(row, grid, label="bounds_iid")
    return _finish(n, rates, rows, {"mode": "iid", "ensemble": ensemble})


def bounds_additive(spec: AdditiveChannelSpec, rates: RateTuple, n: int,
                    s_grid: Optional[Sequence[float]] = None, ensemble: bool = False) -> ExponentReport:
    """
    加性信道、均匀输入 V=X 时的闭式界：
    I↑ = ln q - H_{1/(1+s)}(N)，I↓(Z;X_i) = 0，I↓(Z;X1X2) = ln q - H_{1+s}(N3)。
    """
    n = _check_n(n)
    grid = _check_grid(default_s_grid() if s_grid is None else s_grid)
    lnq = math.log(spec.q)
    n1, n2, n3 = (spec.noise_pmf(i) for i in (1, 2, 3))
    rows = []
    for s in grid:
        q = _Terms(
            up1=lnq - renyi_entropy(n2, 1.0 / (1.0 + s)),
            up2=lnq - renyi_entropy(n1, 1.0 / (1.0 + s)),
            z1=0.0,
            z2=0.0,
            z12=lnq - renyi_entropy(n3, 1.0 + s),
        )
        rows.append(_assemble(s, n, rates, q, ensemble))
    return _finish(n, rates, rows, {"mode": "additive", "ensemble": ensemble, "q": spec.q})


# ==============================
# 常组成码
# ==============================
FACTOR_MODES = ("exact", "bound")


def log_nu(d: int, n: int, factor_mode: str) -> float:
    if factor_mode == "exact":
        return log_nu_exact(d, n)
    if factor_mode == "bound":
        return math.log(nu_bound(d, n))
    raise ValidationError(f"未知的因子模式: {factor_mode}")


def log_type_count(d: int, n: int, factor_mode: str) -> float:
    """ln|T_n|；bound 模式用 (1+n)^d 代替。"""
    if factor_mode == "exact":
        return math.log(count_types(d, n))
    if factor_mode == "bound":
        return math.log(nu_bound(d, n))
    raise ValidationError(f"未知的因子模式: {factor_mode}")


def nu_factors(sizes: Tuple[int, int, int, int, int], v_sizes: Tuple[int, int], n: int, s: float,
               factor_mode: str) -> Tuple[float, float]:
    """
    返回 (ln ν_n', ln ν_n)：
    ν_n = ν_n(|X1||X2|·max|V|)，
    ν_n' = ν_n(|X1|)ν_n(|X2|)·max_i |T_n(Y_i×X_i)|^{1+s} ν_n(|Y_i||X_i|)^s。
    """
    dx1, dx2, dy1, dy2, _ = sizes
    log_leak = log_nu(dx1 * dx2 * max(v_sizes), n, factor_mode)
    per_user = [
        (1.0 + s) * log_type_count(dy * dx, n, factor_mode) + s * log_nu(dy * dx, n, factor_mode)
        for dy, dx in ((dy1, dx1), (dy2, dx2))
    ]
    log_err = log_nu(dx1, n, factor_mode) + log_nu(dx2, n, factor_mode) + max(per_user)
    return log_err, log_leak


def law_from_types(jt1: JointType, jt2: JointType) -> JointInputLaw:
    """联合型确定的输入律：P_V 取 V 边缘型，P_{X|V} 取条件型。"""
    return JointInputLaw(jt1.v_type.pmf, jt1.conditional(), jt2.v_type.pmf, jt2.conditional())


def _check_types(t: ChannelTensor, jt1: JointType, jt2: JointType, n: int) -> None:
    if jt1.n != n or jt2.n != n:
        raise ValidationError(f"联合型的长度 ({jt1.n}, {jt2.n}) 与码长 n={n} 不符")
    if (jt1.array.shape[1], jt2.array.shape[1]) != t.sizes[:2]:
        raise ValidationError(f"联合型的 X 字母表与信道 {t.sizes[:2]} 不符")


def bounds_constant_composition(t: ChannelTensor, jt1: JointType, jt2: JointType, rates: RateTuple, n: int,
                                s_grid: Optional[Sequence[float]] = None, factor_mode: Optional[str] = None,
                                ensemble: bool = False) -> ExponentReport:
    """
    常组成码的界：错误项用 Ĭ_{1/(1+s)}(Y;V|X) 乘 ν_n'，泄露项用 Ĭ_{1/(1-s)}(Z;V_S) 乘 ν_n。
    阶数 1/(1-s) 要求 s < 1，默认网格为 k/(size+1)。
    """
    n = _check_n(n)
    mode = factor_mode or config_manager.config.FACTOR_MODE
    if mode not in FACTOR_MODES:
        raise ValidationError(f"未知的因子模式: {mode}")
    grid = _check_grid(default_s_grid(open_right=True) if s_grid is None else s_grid, open_right=True)
    _check_types(t, jt1, jt2, n)

    joint = compose_effective(t, law_from_types(jt1, jt2))
    ch1, in1 = joint.conditional_channel(("y2",), ("v1", "x2"))
    ch2, in2 = joint.conditional_channel(("y1",), ("v2", "x1"))
    ch_z1, p_v1 = joint.conditional_channel(("z",), ("v1",))
    ch_z2, p_v2 = joint.conditional_channel(("z",), ("v2",))
    ch_z12, p_v12 = joint.conditional_channel(("z",), ("v1", "v2"))
    ch_z12 = ch_z12.reshape(-1, ch_z12.shape[-1])
    p_v12 = p_v12.ravel()
    v_sizes = (jt1.array.shape[0], jt2.array.shape[0])

    def row(s: float) -> ExponentRow:
        err_order, leak_order = 1.0 / (1.0 + s), 1.0 / (1.0 - s)
        q = _Terms(
            up1=breve_mi_conditional(ch1, in1, err_order),
            up2=breve_mi_conditional(ch2, in2, err_order),
            z1=breve_mi(ch_z1, p_v1, leak_order),
            z2=breve_mi(ch_z2, p_v2, leak_order),
            z12=breve_mi(ch_z12, p_v12, leak_order),
        )
        log_err, log_leak = nu_factors(t.sizes, v_sizes, n, s, mode)
        return _assemble(s, n, rates, q, ensemble, log_err_factor=log_err, log_leak_factor=log_leak)

    rows = runner.map(row, grid, label="bounds_constant_composition")
    return _finish(n, rates, rows, {"mode": "constant_composition", "factor_mode": mode, "ensemble": ensemble})


# ==============================
# 随机化速率可行域
# ==============================
@dataclass
class RandomnessRegion:
    """(r1, r2) 的可行多边形（严格不等式的闭包顶点）及一个内点见证。"""
    feasible: bool
    system: LinearSystem
    vertices: np.ndarray
    witness: Optional[Tuple[float, float]]
    meta: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "feasible": self.feasible,
            "system": self.system.to_dict(),
            "vertices": self.vertices.tolist(),
            "witness": list(self.witness) if self.witness is not None else None,
            "meta": dict(self.meta),
        }


def feasible_randomness(t: ChannelTensor, law: JointInputLaw, R1: float, R2: float,
                        secrecy: str = "joint") -> RandomnessRegion:
    """
    固定 (R1, R2) 后，保密下界与可靠性上界在 (r1, r2) 上围成的多边形。
    为空即 (R1, R2) 不在该律的单律区域内。
    """
    terms = secrecy_terms(t, law)
    values: Dict[str, float] = {"R1": float(R1), "R2": float(R2), **terms_as_parameters(terms)}
    system = rate_constraint_system(secrecy).substitute(values)
    system = system.extended([
        Inequality((-1.0, 0.0), "<=", 0.0),
        Inequality((0.0, -1.0), "<=", 0.0),
    ])
    projection = fourier_motzkin(system, ["r1", "r2"])
    feasible = not projection.is_infeasible()
    reduced = reduce_system(system)
    meta = {"secrecy": secrecy, "R1": float(R1), "R2": float(R2), "terms": terms._asdict()}
    if not feasible:
        logger.info("随机化速率约束不可行", extra={"extra_data": meta})
        return RandomnessRegion(False, system, np.zeros((0, 2)), None, meta)

    halfspaces = []
    for ineq in system.inequalities:
        up = ineq.upper_form()
        halfspaces.append((float(up.coeffs[0]), float(up.coeffs[1]), float(up.constant)))
    vertices = halfspace_vertices(halfspaces, nonnegative=False)
    witness = tuple(float(x) for x in vertices.mean(axis=0)) if len(vertices) else None
    if witness is not None and not system.satisfied_by({"r1": witness[0], "r2": witness[1]}):
        logger.warning("⚠️ 顶点重心不严格满足约束（可行域过窄）", extra={"extra_data": {"witness": witness}})
    return RandomnessRegion(True, reduced, vertices, witness, meta)
