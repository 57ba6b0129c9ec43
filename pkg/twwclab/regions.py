"""
速率区域计算：单输入律区域（联合/个体保密）、输入律族并集的凸包、
成本约束与时分复用、加性与高斯信道闭式区域，以及速率约束系统的
Fourier-Motzkin 投影。所有速率单位为 nats/次信道使用。
"""
import itertools
import logging
import math
import os
import time
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, root_validator, validator

from twwclab.channel import (
    AdditiveChannelSpec,
    ChannelTensor,
    CostSpec,
    GaussianChannelSpec,
    JointInputLaw,
    compose_effective,
    within_budget,
)
from twwclab.config import FIXTURE_DIR, config_manager
from twwclab.errors import BudgetError, ValidationError, check_size
from twwclab.measures import PMF_TOL, conditional_mutual_information, mutual_information, shannon_entropy
from twwclab.polytope import (  # noqa: F401
    Halfspace,
    LinearSystem,
    RateRegion2D,
    fourier_motzkin,
    minkowski_combination,
)
from twwclab.runner import runner
from twwclab.storage import artifact_store
from twwclab.typelib import iter_types

logger = logging.getLogger(__name__)

FLAVORS = ("joint", "individual")
# 输入律网格的规模上限
MAX_LAWS = 10 ** 5


# ==============================
# 单输入律区域
# ==============================
class SecrecyTerms(NamedTuple):
    """区域与随机化约束共用的五个 Shannon 量（nats）。"""
    i_y2_v1: float      # I(Y2;V1|X2)
    i_y1_v2: float      # I(Y1;V2|X1)
    i_z_v1: float       # I(Z;V1)
    i_z_v2: float       # I(Z;V2)
    i_z_v1v2: float     # I(Z;V1V2)


def secrecy_terms(t: ChannelTensor, law: JointInputLaw) -> SecrecyTerms:
    joint = compose_effective(t, law)
    z_v1v2 = joint.marginal("z", "v1", "v2")
    return SecrecyTerms(
        i_y2_v1=conditional_mutual_information(joint.marginal("y2", "v1", "x2")),
        i_y1_v2=conditional_mutual_information(joint.marginal("y1", "v2", "x1")),
        i_z_v1=mutual_information(joint.marginal("z", "v1")),
        i_z_v2=mutual_information(joint.marginal("z", "v2")),
        i_z_v1v2=mutual_information(z_v1v2.reshape(z_v1v2.shape[0], -1)),
    )


def _bounds(terms: SecrecyTerms) -> Tuple[float, float, float]:
    g1 = max(terms.i_y2_v1 - terms.i_z_v1, 0.0)
    g2 = max(terms.i_y1_v2 - terms.i_z_v2, 0.0)
    g3 = max(terms.i_y2_v1 + terms.i_y1_v2 - terms.i_z_v1v2, 0.0)
    return g1, g2, g3


def _flavor_halfspaces(flavor: str, g1: float, g2: float, g3: float) -> List[Halfspace]:
    if flavor == "joint":
        return [(1.0, 0.0, g1), (0.0, 1.0, g2), (1.0, 1.0, g3)]
    if flavor == "individual":
        # max(R1, R2) ≤ g3 展开为两条半空间
        return [(1.0, 0.0, g1), (0.0, 1.0, g2), (1.0, 0.0, g3), (0.0, 1.0, g3)]
    raise ValidationError(f"未知的保密类型: {flavor}")


def region_joint(t: ChannelTensor, law: JointInputLaw) -> RateRegion2D:
    """联合保密单律区域，右端为负时截断为 0。"""
    terms = secrecy_terms(t, law)
    return RateRegion2D.from_halfspaces(_flavor_halfspaces("joint", *_bounds(terms)),
                                        meta={"flavor": "joint", "terms": terms._asdict()})


def region_individual(t: ChannelTensor, law: JointInputLaw) -> RateRegion2D:
    """个体保密单律区域：第三族约束为 max(R1,R2) ≤ ...。"""
    terms = secrecy_terms(t, law)
    return RateRegion2D.from_halfspaces(_flavor_halfspaces("individual", *_bounds(terms)),
                                        meta={"flavor": "individual", "terms": terms._asdict()})


def region_single(t: ChannelTensor, law: JointInputLaw, flavor: str = "joint") -> RateRegion2D:
    if flavor == "joint":
        return region_joint(t, law)
    if flavor == "individual":
        return region_individual(t, law)
    raise ValidationError(f"未知的保密类型: {flavor}")


# ==============================
# 输入律族与并集
# ==============================
def _simplex_lattice(d: int, steps: int) -> List[np.ndarray]:
    return [tv.pmf for tv in iter_types(d, steps)]


def law_grid(d1: int, d2: int, steps: Optional[int] = None,
             v_sizes: Optional[Tuple[int, int]] = None) -> List[JointInputLaw]:
    """
    步长 1/k 的单纯形格点输入律族。

    :param v_sizes: None 时取 V=X；否则 (|V1|, |V2|)，P_V 与 P_{X|V} 的每一行都取格点。
    """
    k = steps or config_manager.config.LAW_GRID_STEPS
    if k < 1:
        raise ValidationError(f"格点步数必须为正: {k}")
    if v_sizes is None:
        check_size(math.comb(k + d1 - 1, d1 - 1) * math.comb(k + d2 - 1, d2 - 1), MAX_LAWS, "输入律网格")
        return [JointInputLaw.identity(p1, p2)
                for p1, p2 in itertools.product(_simplex_lattice(d1, k), _simplex_lattice(d2, k))]

    dv1, dv2 = v_sizes

    def user_laws(dv: int, dx: int) -> List[Tuple[np.ndarray, np.ndarray]]:
        n_rows = math.comb(k + dx - 1, dx - 1) ** dv
        check_size(math.comb(k + dv - 1, dv - 1) * n_rows, MAX_LAWS, "输入律网格")
        rows = _simplex_lattice(dx, k)
        return [(pv, np.vstack(cond)) for pv in _simplex_lattice(dv, k)
                for cond in itertools.product(rows, repeat=dv)]

    u1, u2 = user_laws(dv1, d1), user_laws(dv2, d2)
    check_size(len(u1) * len(u2), MAX_LAWS, "输入律网格")
    return [JointInputLaw(a[0], a[1], b[0], b[1]) for a, b in itertools.product(u1, u2)]


def region_union(t: ChannelTensor, laws: Sequence[JointInputLaw], cost: Optional[CostSpec] = None,
                 flavor: str = "joint") -> RateRegion2D:
    """
    输入律族上各单律区域并集的凸包。给定成本时只保留平均成本不超预算的律。
    """
    if not laws:
        raise ValidationError("输入律列表不能为空")
    if flavor not in FLAVORS:
        raise ValidationError(f"未知的保密类型: {flavor}")
    kept = [law for law in laws if cost is None or within_budget(law, cost)]
    meta = {"flavor": flavor, "n_laws": len(laws), "n_kept": len(kept)}
    if cost is not None:
        meta["budgets"] = [cost.c1, cost.c2]
    if not kept:
        logger.warning(f"⚠️ 全部 {len(laws)} 个输入律都超出成本预算")
        return RateRegion2D.empty({**meta, "flag": "all_laws_filtered"})

    start_time = time.time()
    members = runner.map(lambda law: region_single(t, law, flavor), kept, label="region_union")
    points = [tuple(v) for region in members for v in region.vertices]
    region = RateRegion2D.from_points(points, meta)
    logger.info(f"✅ 并集区域计算完成，顶点 {len(region.vertices)} 个", extra={"extra_data": {
        "n_laws": len(kept), "elapsed": round(time.time() - start_time, 4)}})
    return region


# ==============================
# 时分复用
# ==============================
class TimeSharingPlan(BaseModel):
    """Q(j) 为各段权重，budgets[j] = (c1^j, c2^j) 为各段成本预算。"""
    weights: List[float]
    budgets: List[Tuple[float, float]]

    class Config:
        allow_mutation = False

    @validator("weights")
    def _pmf(cls, v):
        if not v or any((not np.isfinite(w)) or w < 0 for w in v):
            raise ValueError("权重必须非负且有限")
        if abs(sum(v) - 1.0) > PMF_TOL:
            raise ValueError(f"权重之和必须为 1，实际 {sum(v):.12g}")
        return v

    @root_validator(skip_on_failure=True)
    def _lengths(cls, values):
        if len(values["weights"]) != len(values["budgets"]):
            raise ValueError("weights 与 budgets 的段数不一致")
        return values

    def average_budget(self) -> Tuple[float, float]:
        c = np.asarray(self.budgets, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        return float(w @ c[:, 0]), float(w @ c[:, 1])

    def check_budget(self, c1: float, c2: float) -> None:
        a1, a2 = self.average_budget()
        if a1 > c1 + PMF_TOL or a2 > c2 + PMF_TOL:
            raise BudgetError(f"时分方案的平均预算 ({a1:.6g}, {a2:.6g}) 超出总预算 ({c1:.6g}, {c2:.6g})")


def region_time_share(plan: TimeSharingPlan, regions: Sequence[RateRegion2D],
                      budget: Tuple[float, float]) -> RateRegion2D:
    """各段区域按权重做闵可夫斯基加权和。"""
    if len(regions) != len(plan.weights):
        raise ValidationError(f"段区域个数 {len(regions)} 与方案段数 {len(plan.weights)} 不符")
    plan.check_budget(*budget)
    return minkowski_combination(regions, plan.weights, meta={
        "flavor": "time_share", "weights": list(plan.weights), "budgets": [list(b) for b in plan.budgets]})


def time_shared_union(t: ChannelTensor, laws: Sequence[JointInputLaw], plan: TimeSharingPlan,
                      cost: CostSpec, flavor: str = "joint") -> RateRegion2D:
    """每段在自己的预算下取并集区域，再按方案权重组合。"""
    plan.check_budget(cost.c1, cost.c2)
    segments = [region_union(t, laws, cost.copy(update={"c1": c1, "c2": c2}), flavor)
                for c1, c2 in plan.budgets]
    return region_time_share(plan, segments, (cost.c1, cost.c2))


# ==============================
# 加性信道闭式区域
# ==============================
def region_additive(spec: AdditiveChannelSpec, flavor: str = "joint") -> RateRegion2D:
    """均匀输入下的闭式区域；outer 只含两个单速率界。"""
    lnq = math.log(spec.q)
    h1, h2, h3 = (shannon_entropy(spec.noise_pmf(i)) for i in (1, 2, 3))
    g1 = max(lnq - h2, 0.0)
    g2 = max(lnq - h1, 0.0)
    meta = {"flavor": flavor, "q": spec.q, "entropies": [h1, h2, h3]}
    if flavor == "outer":
        return RateRegion2D.from_halfspaces([(1.0, 0.0, g1), (0.0, 1.0, g2)], meta)
    g3 = max(lnq + h3 - h1 - h2, 0.0)
    return RateRegion2D.from_halfspaces(_flavor_halfspaces(flavor, g1, g2, g3), meta)


# ==============================
# 高斯信道闭式区域
# ==============================
def _check_powers(p1: float, p2: float) -> None:
    if not (np.isfinite(p1) and np.isfinite(p2)) or p1 < 0 or p2 < 0:
        raise ValidationError(f"功率必须非负且有限: ({p1}, {p2})")


def gaussian_inner_bounds(spec: GaussianChannelSpec, p1: float, p2: float) -> Tuple[float, float, float]:
    """功率 (p1, p2) 下的三个内界右端（已截断为非负）。"""
    _check_powers(p1, p2)
    a2, a3 = spec.coeff("a2"), spec.coeff("a3")
    b1, b3 = spec.coeff("b1"), spec.coeff("b3")
    v1, v2, v3 = spec.variances
    eve = math.log(a3 ** 2 * p1 + b3 ** 2 * p2 + v3)
    g1 = 0.5 * (math.log(a2 ** 2 * p1 + v2) - math.log(v2) - eve + math.log(b3 ** 2 * p2 + v3))
    g2 = 0.5 * (math.log(b1 ** 2 * p2 + v1) - math.log(v1) - eve + math.log(a3 ** 2 * p1 + v3))
    g3 = 0.5 * (math.log(b1 ** 2 * p2 + v1) + math.log(a2 ** 2 * p1 + v2) - eve
                + math.log(v3) - math.log(v1) - math.log(v2))
    return max(g1, 0.0), max(g2, 0.0), max(g3, 0.0)


def region_gaussian_inner(spec: GaussianChannelSpec, p1: float, p2: float, flavor: str = "joint") -> RateRegion2D:
    g = gaussian_inner_bounds(spec, p1, p2)
    return RateRegion2D.from_halfspaces(_flavor_halfspaces(flavor, *g),
                                        meta={"flavor": flavor, "powers": [p1, p2]})


def region_gaussian_inner_hull(spec: GaussianChannelSpec, c1: float, c2: float,
                               resolution: Optional[int] = None, flavor: str = "joint") -> RateRegion2D:
    """功率网格 {0..c1}×{0..c2} 上各内界区域的凸包。"""
    res = resolution or config_manager.config.GRID_RESOLUTION
    if res < 2:
        raise ValidationError(f"功率网格分辨率至少为 2: {res}")
    _check_powers(c1, c2)
    grid = list(itertools.product(np.linspace(0.0, c1, res), np.linspace(0.0, c2, res)))
    members = runner.map(lambda p: region_gaussian_inner(spec, float(p[0]), float(p[1]), flavor), grid,
                         label="gaussian_hull")
    points = [tuple(v) for region in members for v in region.vertices]
    return RateRegion2D.from_points(points, meta={"flavor": flavor, "budgets": [c1, c2], "resolution": res})


def region_gaussian_outer(spec: GaussianChannelSpec, c1: float, c2: float) -> RateRegion2D:
    """
    外界：R1 ≤ ½ln(1+a2²c1/v2)，R2 ≤ ½ln(1+b1²c2/v1)，和速率与内界在 (c1,c2) 处相同。
    噪声条件 (b3²/b1²)v1 + (a3²/a2²)v2 ≤ v3 不满足时结果带 condition_unmet 标记。
    """
    _check_powers(c1, c2)
    a2, a3 = spec.coeff("a2"), spec.coeff("a3")
    b1, b3 = spec.coeff("b1"), spec.coeff("b3")
    v1, v2, v3 = spec.variances
    meta: Dict[str, object] = {"flavor": "outer", "budgets": [c1, c2]}
    if b1 == 0 or a2 == 0:
        condition_met = False
    else:
        mix = (b3 ** 2 / b1 ** 2) * v1 + (a3 ** 2 / a2 ** 2) * v2
        meta["noise_mix"] = mix
        condition_met = mix <= v3 * (1.0 + 1e-12)
    meta["condition_met"] = condition_met
    if not condition_met:
        meta["flag"] = "condition_unmet"
        logger.warning("⚠️ 高斯外界的噪声条件不满足，结果仅作参考")

    g1 = 0.5 * math.log1p(a2 ** 2 * c1 / v2)
    g2 = 0.5 * math.log1p(b1 ** 2 * c2 / v1)
    g3 = gaussian_inner_bounds(spec, c1, c2)[2]
    return RateRegion2D.from_halfspaces([(1.0, 0.0, g1), (0.0, 1.0, g2), (1.0, 1.0, g3)], meta)


# ==============================
# 速率约束系统
# ==============================
PARAMETERS = ("I_Z_V1", "I_Z_V2", "I_Z_V1V2", "I_Y2_V1gX2", "I_Y1_V2gX1")
RATE_VARIABLES = ("r1", "r2", "R1", "R2")


def rate_constraint_system(secrecy: str = "joint") -> LinearSystem:
    """
    (r1, r2, R1, R2) 的保密下界与可靠性上界，信息量作为符号参数列。
    消去 r1、r2 即得单律区域。
    """
    rows = [
        ({"r1": 1, "I_Z_V1": -1}, ">"),
        ({"r2": 1, "I_Z_V2": -1}, ">"),
    ]
    if secrecy == "joint":
        rows.append(({"r1": 1, "r2": 1, "I_Z_V1V2": -1}, ">"))
    elif secrecy == "individual":
        rows.append(({"r1": 1, "r2": 1, "R1": 1, "I_Z_V1V2": -1}, ">"))
        rows.append(({"r1": 1, "r2": 1, "R2": 1, "I_Z_V1V2": -1}, ">"))
    else:
        raise ValidationError(f"未知的保密类型: {secrecy}")
    rows.append(({"R1": 1, "r1": 1, "I_Y2_V1gX2": -1}, "<"))
    rows.append(({"R2": 1, "r2": 1, "I_Y1_V2gX1": -1}, "<"))
    data = {
        "variables": list(RATE_VARIABLES + PARAMETERS),
        "inequalities": [{"coeffs": {k: str(v) for k, v in coeffs.items()}, "sense": sense, "constant": "0"}
                         for coeffs, sense in rows],
    }
    return LinearSystem.from_dict(data)


def terms_as_parameters(terms: SecrecyTerms) -> Dict[str, float]:
    return dict(zip(PARAMETERS, (terms.i_z_v1, terms.i_z_v2, terms.i_z_v1v2, terms.i_y2_v1, terms.i_y1_v2)))


def load_fm_fixture(name: str) -> Tuple[LinearSystem, List[str], LinearSystem]:
    """
    读取随包附带的消元样例：(系统, 消元顺序, 期望投影)。

    :param name: "individual" 或 "joint"。
    """
    data = artifact_store.read_json(os.path.join(FIXTURE_DIR, f"fm_{name}.json"))
    expected = artifact_store.read_json(os.path.join(FIXTURE_DIR, f"fm_{name}_expected.json"))
    return LinearSystem.from_dict(data), list(data.get("eliminate", [])), LinearSystem.from_dict(expected)
