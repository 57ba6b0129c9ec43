"""
信道模型：通用离散无记忆双向窃听信道张量、预处理复合、
有限域加性信道以及高斯信道参数容器。
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, root_validator, validator

from twwclab.errors import ValidationError, check_size
from twwclab.measures import PMF_TOL, ZERO_SNAP, as_cond_pmf, as_pmf

logger = logging.getLogger(__name__)

# 稠密张量元素个数上限
MAX_TENSOR_ENTRIES = 10 ** 7

AXES = ("v1", "v2", "x1", "x2", "y1", "y2", "z")


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    d = 2
    while d * d <= q:
        if q % d == 0:
            return False
        d += 1
    return True


# ==============================
# 信道张量
# ==============================
@dataclass(frozen=True, eq=False)
class ChannelTensor:
    """
    P(y1, y2, z | x1, x2)，数组轴顺序为 [x1, x2, y1, y2, z]。
    构造时只检查形状与规模，归一化由 validate_channel 诊断。
    """
    probs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.probs, dtype=float)
        if arr.ndim != 5:
            raise ValidationError(f"信道张量必须是 5 维 [x1,x2,y1,y2,z]，实际 {arr.ndim} 维")
        if min(arr.shape) < 1:
            raise ValidationError(f"字母表大小必须为正: {arr.shape}")
        check_size(int(arr.size), MAX_TENSOR_ENTRIES, "信道张量")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def sizes(self) -> Tuple[int, int, int, int, int]:
        return tuple(int(d) for d in self.probs.shape)

    @cached_property
    def diagnostics(self) -> "ChannelDiagnostics":
        return validate_channel(self)

    def require_valid(self) -> "ChannelTensor":
        diag = self.diagnostics
        if not diag.ok:
            raise ValidationError("信道张量不合法: " + "; ".join(diag.issues[:5]))
        return self

    def y1_channel(self) -> np.ndarray:
        """P_{Y1|X1X2}，形状 [x1, x2, y1]。"""
        return self.probs.sum(axis=(3, 4))

    def y2_channel(self) -> np.ndarray:
        """P_{Y2|X1X2}，形状 [x1, x2, y2]。"""
        return self.probs.sum(axis=(2, 4))

    def z_channel(self) -> np.ndarray:
        """P_{Z|X1X2}，形状 [x1, x2, z]。"""
        return self.probs.sum(axis=(2, 3))

    @classmethod
    def from_flat(cls, sizes: Sequence[int], probs: Sequence[float]) -> "ChannelTensor":
        sizes = [int(d) for d in sizes]
        if len(sizes) != 5:
            raise ValidationError("sizes 必须给出 [|X1|,|X2|,|Y1|,|Y2|,|Z|]")
        total = int(np.prod(sizes))
        check_size(total, MAX_TENSOR_ENTRIES, "信道张量")
        flat = np.asarray(probs, dtype=float)
        if flat.size != total:
            raise ValidationError(f"probs 长度 {flat.size} 与 sizes 乘积 {total} 不符")
        return cls(flat.reshape(sizes))

    @classmethod
    def from_marginals(cls, y1: np.ndarray, y2: np.ndarray, z: np.ndarray) -> "ChannelTensor":
        """三个输出条件独立时由各自的 [x1,x2,out] 信道拼出张量。"""
        probs = y1[:, :, :, None, None] * y2[:, :, None, :, None] * z[:, :, None, None, :]
        return cls(probs)


@dataclass(frozen=True, eq=False)
class ChannelDiagnostics:
    ok: bool
    issues: List[str] = field(default_factory=list)


def validate_channel(t: ChannelTensor) -> ChannelDiagnostics:
    """逐 (x1, x2) 切片检查非负性与归一化，返回诊断而不抛异常。"""
    issues: List[str] = []
    probs = t.probs
    if not np.all(np.isfinite(probs)):
        issues.append("张量含有非有限值")
    d1, d2 = probs.shape[:2]
    for x1 in range(d1):
        for x2 in range(d2):
            block = probs[x1, x2]
            if np.any(block < -ZERO_SNAP):
                issues.append(f"切片 (x1={x1}, x2={x2}) 含负概率 {block.min():.3e}")
            total = float(block.sum())
            if abs(total - 1.0) > PMF_TOL:
                issues.append(f"切片 (x1={x1}, x2={x2}) 的和为 {total:.12g}")
    if issues:
        logger.debug("信道张量诊断失败", extra={"extra_data": {"issues": len(issues)}})
    return ChannelDiagnostics(ok=not issues, issues=issues)


# ==============================
# 输入律
# ==============================
@dataclass(frozen=True, eq=False)
class JointInputLaw:
    """P_{V1} P_{X1|V1} × P_{V2} P_{X2|V2}。"""
    pV1: np.ndarray
    pX1gV1: np.ndarray
    pV2: np.ndarray
    pX2gV2: np.ndarray

    def __post_init__(self):
        values = {
            "pV1": as_pmf(self.pV1, "pV1"),
            "pX1gV1": as_cond_pmf(self.pX1gV1, "pX1gV1"),
            "pV2": as_pmf(self.pV2, "pV2"),
            "pX2gV2": as_cond_pmf(self.pX2gV2, "pX2gV2"),
        }
        if values["pV1"].ndim != 1 or values["pV2"].ndim != 1:
            raise ValidationError("pV1 / pV2 必须是一维分布")
        if values["pX1gV1"].ndim != 2 or values["pX1gV1"].shape[0] != values["pV1"].size:
            raise ValidationError("pX1gV1 的行数必须等于 |V1|")
        if values["pX2gV2"].ndim != 2 or values["pX2gV2"].shape[0] != values["pV2"].size:
            raise ValidationError("pX2gV2 的行数必须等于 |V2|")
        for name, arr in values.items():
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def pX1(self) -> np.ndarray:
        return self.pV1 @ self.pX1gV1

    @property
    def pX2(self) -> np.ndarray:
        return self.pV2 @ self.pX2gV2

    @property
    def sizes(self) -> Tuple[int, int, int, int]:
        """(|V1|, |X1|, |V2|, |X2|)"""
        return (self.pV1.size, self.pX1gV1.shape[1], self.pV2.size, self.pX2gV2.shape[1])

    @classmethod
    def identity(cls, pX1, pX2) -> "JointInputLaw":
        """V_i = X_i 的恒等预处理。"""
        pX1 = as_pmf(pX1, "pX1")
        pX2 = as_pmf(pX2, "pX2")
        return cls(pX1, np.eye(pX1.size), pX2, np.eye(pX2.size))

    @classmethod
    def uniform(cls, d1: int, d2: int) -> "JointInputLaw":
        return cls.identity(np.full(d1, 1.0 / d1), np.full(d2, 1.0 / d2))


# ==============================
# 复合联合分布
# ==============================
@dataclass(frozen=True, eq=False)
class EffectiveJoint:
    """单次信道使用下 (V1,V2,X1,X2,Y1,Y2,Z) 的联合分布。"""
    probs: np.ndarray

    def marginal(self, *names: str) -> np.ndarray:
        """按给定变量顺序返回边缘分布。"""
        unknown = [n for n in names if n not in AXES]
        if unknown or len(set(names)) != len(names):
            raise ValidationError(f"非法变量名: {names}")
        keep = [AXES.index(n) for n in names]
        drop = tuple(i for i in range(len(AXES)) if i not in keep)
        reduced = self.probs.sum(axis=drop)
        remaining = [i for i in range(len(AXES)) if i in keep]
        return np.transpose(reduced, [remaining.index(i) for i in keep])

    def conditional_channel(self, out: Sequence[str], given: Sequence[str]) -> Tuple[np.ndarray, np.ndarray]:
        """
        P_{out|given}（给定变量展平为前若干轴、输出展平为最后一轴）及 P_{given}。
        P_{given}=0 的行以均匀分布填充。
        """
        joint = self.marginal(*given, *out)
        g_shape = joint.shape[:len(given)]
        o_size = int(np.prod(joint.shape[len(given):]))
        joint = joint.reshape(*g_shape, o_size)
        p_given = joint.sum(axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            chan = joint / p_given[..., None]
        chan[p_given <= 0] = 1.0 / o_size
        return chan, p_given


def compose_effective(t: ChannelTensor, law: JointInputLaw) -> EffectiveJoint:
    """
    P(v1,v2,x1,x2,y1,y2,z) = P_{V1}(v1)P_{X1|V1}(x1|v1)P_{V2}(v2)P_{X2|V2}(x2|v2)·P(y1,y2,z|x1,x2)
    """
    t.require_valid()
    dv1, dx1, dv2, dx2 = law.sizes
    if (dx1, dx2) != t.sizes[:2]:
        raise ValidationError(f"输入字母表不匹配: 输入律 ({dx1},{dx2})，信道 {t.sizes[:2]}")
    check_size(dv1 * dv2 * int(t.probs.size), MAX_TENSOR_ENTRIES, "复合联合分布")
    u1 = law.pV1[:, None] * law.pX1gV1            # [v1, x1]
    u2 = law.pV2[:, None] * law.pX2gV2            # [v2, x2]
    probs = np.einsum("ac,bd,cdefg->abcdefg", u1, u2, t.probs)
    return EffectiveJoint(probs)


# ==============================
# 成本
# ==============================
class CostSpec(BaseModel):
    g1: List[float]
    g2: List[float]
    c1: float
    c2: float

    @validator("g1", "g2")
    def _finite_vector(cls, v):
        if not v or not np.all(np.isfinite(v)):
            raise ValueError("成本向量必须非空且有限")
        return v

    @validator("c1", "c2")
    def _finite_budget(cls, v):
        if not np.isfinite(v):
            raise ValueError("预算必须有限")
        return v


def average_cost(law: JointInputLaw, cost: CostSpec) -> Tuple[float, float]:
    """(Σ P_{X1} g1, Σ P_{X2} g2)。"""
    _, dx1, _, dx2 = law.sizes
    if len(cost.g1) != dx1 or len(cost.g2) != dx2:
        raise ValidationError(f"成本向量长度 ({len(cost.g1)},{len(cost.g2)}) 与输入字母表 ({dx1},{dx2}) 不符")
    return float(np.dot(law.pX1, cost.g1)), float(np.dot(law.pX2, cost.g2))


def within_budget(law: JointInputLaw, cost: CostSpec, tol: float = PMF_TOL) -> bool:
    e1, e2 = average_cost(law, cost)
    return e1 <= cost.c1 + tol and e2 <= cost.c2 + tol


# ==============================
# 有限域加性信道
# ==============================
COEFF_NAMES = ("a1", "b1", "a2", "b2", "a3", "b3")


class AdditiveChannelSpec(BaseModel):
    """
    Y1 = a1 X1 + b1 X2 + N1, Y2 = a2 X1 + b2 X2 + N2, Z = a3 X1 + b3 X2 + N3 (mod q)。
    """
    q: int
    coeffs: Dict[str, int]
    noise: List[List[float]]

    class Config:
        allow_mutation = False

    @validator("q")
    def _prime(cls, v):
        if not is_prime(v):
            raise ValueError(f"q={v} 不是素数")
        return v

    @root_validator(skip_on_failure=True)
    def _coefficients_and_noise(cls, values):
        q = values["q"]
        coeffs = values["coeffs"]
        missing = [k for k in COEFF_NAMES if k not in coeffs]
        if missing:
            raise ValueError(f"缺少系数: {missing}")
        for k in COEFF_NAMES:
            if not 1 <= int(coeffs[k]) <= q - 1:
                raise ValueError(f"系数 {k}={coeffs[k]} 必须在 1..{q - 1} 内")
        noise = values["noise"]
        if len(noise) != 3:
            raise ValueError("noise 必须给出 N1, N2, N3 三个分布")
        for i, n in enumerate(noise, start=1):
            if len(n) != q:
                raise ValueError(f"N{i} 的长度必须为 q={q}")
            as_pmf(n, f"N{i}")
        return values

    def coeff(self, name: str) -> int:
        return int(self.coeffs[name])

    def noise_pmf(self, i: int) -> np.ndarray:
        return as_pmf(self.noise[i - 1], f"N{i}")


def additive_to_tensor(spec: AdditiveChannelSpec) -> ChannelTensor:
    """P(y1,y2,z|x1,x2) = P_{N1}(y1-a1x1-b1x2)·P_{N2}(y2-a2x1-b2x2)·P_{N3}(z-a3x1-b3x2)。"""
    q = spec.q
    if not is_prime(q):
        raise ValidationError(f"q={q} 不是素数")
    x1 = np.arange(q)[:, None, None]
    x2 = np.arange(q)[None, :, None]
    out = np.arange(q)[None, None, :]

    def component(a: int, b: int, noise: np.ndarray) -> np.ndarray:
        return noise[(out - a * x1 - b * x2) % q]

    y1 = component(spec.coeff("a1"), spec.coeff("b1"), spec.noise_pmf(1))
    y2 = component(spec.coeff("a2"), spec.coeff("b2"), spec.noise_pmf(2))
    z = component(spec.coeff("a3"), spec.coeff("b3"), spec.noise_pmf(3))
    return ChannelTensor.from_marginals(y1, y2, z)


def field_inverse(a: int, q: int) -> int:
    return pow(int(a), q - 2, q)


def scaled_noise(noise: np.ndarray, c: int, q: int) -> np.ndarray:
    """c·N 的分布。"""
    out = np.zeros(q)
    np.add.at(out, (c * np.arange(q)) % q, noise)
    return out


def convolve_mod(p: np.ndarray, r: np.ndarray, q: int) -> np.ndarray:
    """独立和 N + N' (mod q) 的分布。"""
    out = np.zeros(q)
    for k in range(q):
        out += p[k] * np.roll(r, k)
    return out


def check_noise_decomposition(spec: AdditiveChannelSpec, n3_prime: Sequence[float], tol: float = PMF_TOL) -> bool:
    """
    检验用户给出的见证 N3'：law(N3) 是否等于 (b3/b1)N1 + (a3/a2)N2 + N3' 的分布（独立和）。
    """
    q = spec.q
    witness = as_pmf(n3_prime, "N3'")
    if witness.size != q:
        raise ValidationError(f"N3' 的长度必须为 q={q}")
    c1 = spec.coeff("b3") * field_inverse(spec.coeff("b1"), q) % q
    c2 = spec.coeff("a3") * field_inverse(spec.coeff("a2"), q) % q
    mix = convolve_mod(scaled_noise(spec.noise_pmf(1), c1, q), scaled_noise(spec.noise_pmf(2), c2, q), q)
    return bool(np.max(np.abs(convolve_mod(mix, witness, q) - spec.noise_pmf(3))) <= tol)


def check_degraded_witness(spec: AdditiveChannelSpec, user: int, n_prime: Sequence[float], tol: float = PMF_TOL) -> bool:
    """
    窃听者是接收者 user 的退化版本：Z = c·Y_user + N'（系数关系精确成立，噪声按分布成立）。
    """
    q = spec.q
    witness = as_pmf(n_prime, "N'")
    if witness.size != q:
        raise ValidationError(f"N' 的长度必须为 q={q}")
    if user == 1:
        c = spec.coeff("a3") * field_inverse(spec.coeff("a1"), q) % q
        coeff_ok = (c * spec.coeff("b1") - spec.coeff("b3")) % q == 0
    elif user == 2:
        c = spec.coeff("b3") * field_inverse(spec.coeff("b2"), q) % q
        coeff_ok = (c * spec.coeff("a2") - spec.coeff("a3")) % q == 0
    else:
        raise ValidationError(f"user 只能为 1 或 2: {user}")
    if not coeff_ok:
        return False
    degraded = convolve_mod(scaled_noise(spec.noise_pmf(user), c, q), witness, q)
    return bool(np.max(np.abs(degraded - spec.noise_pmf(3))) <= tol)


def affine_relabel(tensor: ChannelTensor, q: int, scale: int, shift: int) -> ChannelTensor:
    """对所有输入输出同时做域元素重标号 u -> scale·u + shift（scale ≠ 0）。"""
    if scale % q == 0:
        raise ValidationError("scale 必须非零")
    perm = (scale * np.arange(q) + shift) % q
    probs = np.empty_like(tensor.probs)
    probs[np.ix_(perm, perm, perm, perm, perm)] = tensor.probs
    return ChannelTensor(probs)


# ==============================
# 高斯信道参数容器
# ==============================
class GaussianChannelSpec(BaseModel):
    """Y1 = a1X1 + b1X2 + N1, Y2 = a2X1 + b2X2 + N2, Z = a3X1 + b3X2 + N3，N_i ~ N(0, v_i)。"""
    coeffs: Dict[str, float]
    variances: List[float]

    class Config:
        allow_mutation = False

    @validator("coeffs")
    def _all_coeffs(cls, v):
        missing = [k for k in COEFF_NAMES if k not in v]
        if missing:
            raise ValueError(f"缺少系数: {missing}")
        if not all(np.isfinite(v[k]) for k in COEFF_NAMES):
            raise ValueError("系数必须有限")
        return v

    @validator("variances")
    def _positive_variances(cls, v):
        if len(v) != 3:
            raise ValueError("variances 必须给出 [v1, v2, v3]")
        if not all(np.isfinite(x) and x > 0 for x in v):
            raise ValueError(f"噪声方差必须为正: {v}")
        return v

    def coeff(self, name: str) -> float:
        return float(self.coeffs[name])
