"""
型方法：型枚举、型类大小、ν_n 因子、联合/条件型类、
型类上的均匀抽样以及常组成码的成本核算。
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterator, List, Sequence, Tuple

import numpy as np
from scipy.special import gammaln

from twwclab.errors import MarginalMismatchError, ValidationError, check_size
from twwclab.measures import as_pmf

logger = logging.getLogger(__name__)

# 型枚举个数上限
MAX_TYPES = 10 ** 6
# 条件型类成员枚举上限
MAX_CLASS_MEMBERS = 10 ** 6


@dataclass(frozen=True)
class TypeVector:
    """长度 n 序列的经验型，counts 为各符号出现次数。"""
    counts: Tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if not counts:
            raise ValidationError("型向量不能为空")
        if any(c < 0 for c in counts):
            raise ValidationError(f"型向量含负计数: {counts}")
        if sum(counts) < 1:
            raise ValidationError("型向量的总长度必须为正")
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def d(self) -> int:
        return len(self.counts)

    @property
    def pmf(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.n

    @classmethod
    def of(cls, seq: Sequence[int], d: int) -> "TypeVector":
        return cls(tuple(np.bincount(np.asarray(seq, dtype=int), minlength=d)))


@dataclass(frozen=True)
class JointType:
    """
    (V, X) 的联合型，counts[v][x] 为对 (v, x) 出现的次数。
    """
    counts: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(int(c) for c in row) for row in self.counts)
        if not rows or not rows[0]:
            raise ValidationError("联合型不能为空")
        if len({len(r) for r in rows}) != 1:
            raise ValidationError("联合型各行长度必须一致")
        if any(c < 0 for r in rows for c in r):
            raise ValidationError("联合型含负计数")
        if sum(map(sum, rows)) < 1:
            raise ValidationError("联合型的总长度必须为正")
        object.__setattr__(self, "counts", rows)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=int)

    @property
    def n(self) -> int:
        return int(self.array.sum())

    @property
    def v_type(self) -> TypeVector:
        return TypeVector(tuple(self.array.sum(axis=1)))

    @property
    def x_type(self) -> TypeVector:
        return TypeVector(tuple(self.array.sum(axis=0)))

    @property
    def pmf(self) -> np.ndarray:
        return self.array / self.n

    def conditional(self) -> np.ndarray:
        """P_{X|V} = counts / 行和，空行以均匀分布填充。"""
        arr = self.array.astype(float)
        rows = arr.sum(axis=1)
        out = np.full_like(arr, 1.0 / arr.shape[1])
        nz = rows > 0
        out[nz] = arr[nz] / rows[nz, None]
        return out

    @classmethod
    def identity(cls, t: TypeVector) -> "JointType":
        """V = X 的恒等联合型。"""
        return cls(tuple(tuple(c if i == j else 0 for j in range(t.d)) for i, c in enumerate(t.counts)))


# ==============================
# 枚举与计数
# ==============================
def count_types(d: int, n: int) -> int:
    """|T_n| = C(n+d-1, d-1)。"""
    if d < 1 or n < 0:
        raise ValidationError(f"非法参数 d={d}, n={n}")
    return math.comb(n + d - 1, d - 1)


def iter_types(d: int, n: int) -> Iterator[TypeVector]:
    """星与棒构造，按字典序生成全部型。"""
    for bars in itertools.combinations(range(n + d - 1), d - 1):
        edges = (-1,) + bars + (n + d - 1,)
        yield TypeVector(tuple(edges[i + 1] - edges[i] - 1 for i in range(d)))


def enumerate_types(d: int, n: int) -> List[TypeVector]:
    """长度 n、字母表大小 d 的全部型（完整且无重复）。"""
    if d < 1 or n < 1:
        raise ValidationError(f"需要 d ≥ 1, n ≥ 1: d={d}, n={n}")
    check_size(count_types(d, n), MAX_TYPES, "型枚举")
    return list(iter_types(d, n))


def type_class_size(t: TypeVector) -> int:
    """多项式系数 n! / Π counts!（Python 整数任意精度）。"""
    size = 1
    remaining = t.n
    for c in t.counts:
        size *= math.comb(remaining, c)
        remaining -= c
    return size


def log_type_class_size(t: TypeVector) -> float:
    counts = np.asarray(t.counts, dtype=float)
    return float(gammaln(t.n + 1) - gammaln(counts + 1).sum())


def _n_entropy(t: TypeVector) -> float:
    """n·H(P)，P 为型对应的分布。"""
    counts = np.asarray([c for c in t.counts if c > 0], dtype=float)
    return float(-(counts * np.log(counts / t.n)).sum())


def log_nu_exact(d: int, n: int) -> float:
    """ln ν_n(d) = max_P [nH(P) - ln|T_P|]。"""
    return max(_n_entropy(t) - log_type_class_size(t) for t in enumerate_types(d, n))


def nu_exact(d: int, n: int) -> float:
    """ν_n(d) = max_P e^{nH(P)} / |T_P^n|，由全部型枚举得到。"""
    return float(np.exp(log_nu_exact(d, n)))


def nu_bound(d: int, n: int) -> float:
    """(1+n)^d。"""
    return float((1 + n) ** d)


# ==============================
# 抽样
# ==============================
def sample_type_class(t: TypeVector, rng: np.random.Generator) -> np.ndarray:
    """型类 T_P^n 上的均匀抽样：对显式符号多重集做 Fisher-Yates 洗牌。"""
    multiset = np.repeat(np.arange(t.d), t.counts)
    return rng.permutation(multiset)


def _check_v_marginal(jt: JointType, v_seq: np.ndarray) -> None:
    dv = jt.array.shape[0]
    if v_seq.size != jt.n or np.any(v_seq < 0) or np.any(v_seq >= dv):
        raise MarginalMismatchError(f"v 序列长度或取值与联合型不符 (n={jt.n}, |V|={dv})")
    if tuple(np.bincount(v_seq, minlength=dv)) != jt.v_type.counts:
        raise MarginalMismatchError("v 序列的型与联合型的 V 边缘不一致")


def sample_conditional_type_class(jt: JointType, v_seq: Sequence[int], rng: np.random.Generator) -> np.ndarray:
    """
    条件型类 T_{P_{X|V}}(v^n) 上的均匀抽样：
    在每个 V 符号的位置类内独立洗牌与条件计数一致的 X 多重集。
    """
    v_seq = np.asarray(v_seq, dtype=int)
    _check_v_marginal(jt, v_seq)
    counts = jt.array
    x_seq = np.empty(v_seq.size, dtype=int)
    for v in range(counts.shape[0]):
        positions = np.flatnonzero(v_seq == v)
        if positions.size:
            x_seq[positions] = rng.permutation(np.repeat(np.arange(counts.shape[1]), counts[v]))
    return x_seq


def _distinct_permutations(counts: Sequence[int]) -> List[Tuple[int, ...]]:
    """多重集的全部不同排列，逐符号选择位置，按字典序返回。"""
    n = int(sum(counts))
    out: List[Tuple[int, ...]] = []

    def place(symbol: int, free: Tuple[int, ...], seq: List[int]) -> None:
        if symbol == len(counts) - 1:
            for pos in free:
                seq[pos] = symbol
            out.append(tuple(seq))
            return
        for chosen in itertools.combinations(free, int(counts[symbol])):
            for pos in chosen:
                seq[pos] = symbol
            rest = tuple(p for p in free if p not in chosen)
            place(symbol + 1, rest, seq)

    place(0, tuple(range(n)), [0] * n)
    return sorted(out)


def conditional_type_class_members(jt: JointType, v_seq: Sequence[int]) -> np.ndarray:
    """枚举条件型类 T_{P_{X|V}}(v^n) 的全部成员，形状 [成员数, n]。"""
    v_seq = np.asarray(v_seq, dtype=int)
    _check_v_marginal(jt, v_seq)
    counts = jt.array
    size = 1
    for v in range(counts.shape[0]):
        size *= type_class_size(TypeVector(tuple(counts[v]))) if counts[v].sum() else 1
    check_size(size, MAX_CLASS_MEMBERS, "条件型类成员")

    per_class = []
    for v in range(counts.shape[0]):
        positions = np.flatnonzero(v_seq == v)
        if positions.size:
            perms = _distinct_permutations(counts[v].tolist())
            per_class.append((positions, perms))
    members = np.empty((size, v_seq.size), dtype=int)
    for row, combo in enumerate(itertools.product(*(perms for _, perms in per_class))):
        for (positions, _), perm in zip(per_class, combo):
            members[row, positions] = perm
    return members


def type_class_members(t: TypeVector) -> np.ndarray:
    """枚举型类 T_P^n 的全部成员（字典序）。"""
    check_size(type_class_size(t), MAX_CLASS_MEMBERS, "型类成员")
    return np.asarray(_distinct_permutations(t.counts), dtype=int).reshape(-1, t.n)


def joint_type_of(v_seq: Sequence[int], x_seq: Sequence[int], dv: int, dx: int) -> JointType:
    counts = np.zeros((dv, dx), dtype=int)
    np.add.at(counts, (np.asarray(v_seq, dtype=int), np.asarray(x_seq, dtype=int)), 1)
    return JointType(tuple(map(tuple, counts)))


# ==============================
# 成本与取整
# ==============================
def constant_composition_cost(t: TypeVector, g: Sequence[float]) -> float:
    """Σ_x (counts(x)/n)·g(x)，型类中每个序列的成本都等于这个值。"""
    g = np.asarray(g, dtype=float)
    if g.shape != (t.d,):
        raise ValidationError(f"成本向量长度 {g.size} 与字母表 {t.d} 不符")
    return float(np.dot(t.counts, g) / t.n)


def _snap_counts(p: np.ndarray, n: int) -> np.ndarray:
    scaled = p * n
    counts = np.floor(scaled).astype(int)
    remainder = scaled - counts
    missing = n - int(counts.sum())
    # 余数相同时优先给后面的分量，结果在字典序上更小
    order = sorted(range(p.size), key=lambda i: (-round(remainder[i], 12), -i))
    for i in order[:missing]:
        counts[i] += 1
    return counts


def snap_to_type(p, n: int) -> TypeVector:
    """把目标分布取整到全变差意义下最近的 n-型（最大余数法）。"""
    if n < 1:
        raise ValidationError(f"n 必须为正: {n}")
    p = as_pmf(p, "target")
    return TypeVector(tuple(_snap_counts(p.ravel(), n)))


def snap_joint_type(p_vx, n: int) -> JointType:
    """把联合分布 P_{VX}（形状 [v, x]）取整到最近的联合型。"""
    p = as_pmf(p_vx, "target")
    if p.ndim != 2:
        raise ValidationError("联合分布必须是二维 [v, x]")
    counts = _snap_counts(p.ravel(), n).reshape(p.shape)
    return JointType(tuple(map(tuple, counts)))
