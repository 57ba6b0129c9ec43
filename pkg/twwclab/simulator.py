"""
非自适应窃听码的可执行实现：码本生成（i.i.d. / 常组成）、随机化编码、
信道抽样、第二类 ML 译码、Monte Carlo 错误率、小码长下的精确泄露，
以及可解析性界与 Gallager 型界的验证工具。

随机数全部来自计数器式流 stream(seed, *key)，结果与并行调度无关。
消息与随机化下标从 0 开始，用户 i 的 (m, l) 对应码字行 m·L_i + l。
"""
import functools
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm

from twwclab.channel import ChannelTensor, JointInputLaw, compose_effective
from twwclab.config import config_manager
from twwclab.errors import ValidationError, check_size
from twwclab.exponents import RateTuple, default_s_grid, law_from_types, log_nu, log_type_count, _check_grid
from twwclab.measures import (
    _log,
    breve_mi,
    breve_mi_conditional,
    mi_down,
    mi_up_conditional,
    mutual_information,
)
from twwclab.runner import runner
from twwclab.typelib import (
    JointType,
    TypeVector,
    conditional_type_class_members,
    sample_conditional_type_class,
    sample_type_class,
    type_class_members,
    type_class_size,
)

logger = logging.getLogger(__name__)

# 每个用户码本的符号总数上限
MAX_CODEBOOK_SYMBOLS = 10 ** 7
# 精确泄露 |Z|^n·M1L1M2L2 上限
MAX_LEAKAGE_ENTRIES = 10 ** 7
# 码本实现枚举上限
MAX_REALIZATIONS = 10 ** 6
# 验证时的算术余量
VERDICT_SLACK = 1e-9

IID = "iid"
CONSTANT_COMPOSITION = "constant_composition"

# 流标识
CODEBOOK_STREAM = 0
TRIAL_STREAM = 1
SAMPLE_STREAM = 2


def stream(seed: int, *key: int) -> np.random.Generator:
    """由 (seed, key...) 派生的 Philox 计数器式随机流。"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))))


# ==============================
# 码本参数与码本
# ==============================
@dataclass(frozen=True, eq=False)
class CodebookParams:
    """
    码长 n、消息数 M=(M1,M2)、随机化数 L=(L1,L2)。
    law 给出时为 i.i.d. 模式，types=(P_{V1X1}, P_{V2X2}) 给出时为常组成模式。
    """
    n: int
    M: Tuple[int, int]
    L: Tuple[int, int]
    law: Optional[JointInputLaw] = None
    types: Optional[Tuple[JointType, JointType]] = None

    def __post_init__(self):
        if (self.law is None) == (self.types is None):
            raise ValidationError("law 与 types 必须恰好给出一个")
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"码长 n 必须为正整数: {self.n}")
        counts = tuple(int(c) for c in (*self.M, *self.L))
        if len(counts) != 4 or any(c < 1 for c in counts):
            raise ValidationError(f"M 与 L 必须各有两个正整数: M={self.M}, L={self.L}")
        object.__setattr__(self, "M", counts[:2])
        object.__setattr__(self, "L", counts[2:])
        if self.types is not None:
            jt1, jt2 = self.types
            if jt1.n != self.n or jt2.n != self.n:
                raise ValidationError(f"联合型的长度 ({jt1.n}, {jt2.n}) 与码长 n={self.n} 不符")

    @property
    def mode(self) -> str:
        return IID if self.law is not None else CONSTANT_COMPOSITION

    @functools.cached_property
    def input_law(self) -> JointInputLaw:
        return self.law if self.law is not None else law_from_types(*self.types)

    def pV(self, user: int) -> np.ndarray:
        return self.input_law.pV1 if user == 1 else self.input_law.pV2

    def pXgV(self, user: int) -> np.ndarray:
        return self.input_law.pX1gV1 if user == 1 else self.input_law.pX2gV2

    def joint_type(self, user: int) -> JointType:
        return self.types[user - 1]

    def rows(self, user: int) -> int:
        return self.M[user - 1] * self.L[user - 1]

    def describe(self) -> Dict[str, Any]:
        return {"n": self.n, "M": list(self.M), "L": list(self.L), "mode": self.mode}


def _check_user(user: int) -> int:
    if user not in (1, 2):
        raise ValidationError(f"user 只能为 1 或 2: {user}")
    return user


def _check_compat(t: ChannelTensor, params: CodebookParams) -> None:
    _, dx1, _, dx2 = params.input_law.sizes
    if (dx1, dx2) != t.sizes[:2]:
        raise ValidationError(f"输入字母表不匹配: 码本 ({dx1},{dx2})，信道 {t.sizes[:2]}")


@dataclass(frozen=True, eq=False)
class Codebook:
    params: CodebookParams
    codewords: Tuple[np.ndarray, np.ndarray]
    seed: Optional[int] = None

    def __post_init__(self):
        for user, cw in ((1, self.codewords[0]), (2, self.codewords[1])):
            cw = np.asarray(cw)
            if cw.shape != (self.params.rows(user), self.params.n):
                raise ValidationError(f"用户 {user} 码本形状 {cw.shape} 与参数不符")
            dv = self.params.pV(user).size
            if np.any(cw < 0) or np.any(cw >= dv):
                raise ValidationError(f"用户 {user} 码字含越界符号")
            if self.params.mode == CONSTANT_COMPOSITION:
                declared = self.params.joint_type(user).v_type.counts
                for row in cw:
                    if tuple(np.bincount(row, minlength=dv)) != declared:
                        raise ValidationError(f"用户 {user} 码字的型与声明的型不一致")

    @classmethod
    def from_arrays(cls, params: CodebookParams, cw1, cw2, seed: Optional[int] = None) -> "Codebook":
        a = np.array(cw1, dtype=int).reshape(params.rows(1), params.n)
        b = np.array(cw2, dtype=int).reshape(params.rows(2), params.n)
        a.setflags(write=False)
        b.setflags(write=False)
        return cls(params, (a, b), seed)

    def codeword(self, user: int, m: int, l: int) -> np.ndarray:
        return self.codewords[user - 1][m * self.params.L[user - 1] + l]


def _draw_codewords(params: CodebookParams, user: int, count: int, seed: int, key: Tuple[int, ...]) -> np.ndarray:
    check_size(count * params.n, MAX_CODEBOOK_SYMBOLS, f"用户 {user} 码本")
    if params.mode == IID:
        rng = stream(seed, *key, CODEBOOK_STREAM, user)
        pv = params.pV(user)
        return rng.choice(pv.size, size=(count, params.n), p=pv)
    tv = params.joint_type(user).v_type
    rows = [sample_type_class(tv, stream(seed, *key, CODEBOOK_STREAM, user, i)) for i in range(count)]
    return np.vstack(rows).astype(int) if rows else np.zeros((0, params.n), dtype=int)


def generate_codebook(params: CodebookParams, seed: Optional[int] = None, key: Sequence[int] = ()) -> Codebook:
    """
    i.i.d. 模式逐符号按 P_V 抽取码字（每用户一条流）；常组成模式每个码字
    在 V 型类上均匀抽取（每码字一条流）。同一 seed 重跑得到逐位相同的码本。
    """
    seed = config_manager.config.SEED if seed is None else int(seed)
    key = tuple(int(k) for k in key)
    cw1 = _draw_codewords(params, 1, params.rows(1), seed, key)
    cw2 = _draw_codewords(params, 2, params.rows(2), seed, key)
    return Codebook.from_arrays(params, cw1, cw2, seed)


# ==============================
# 编码、信道与译码
# ==============================
def _inverse_cdf(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    """按行累积分布与均匀数取样：x = #{k : cdf_k ≤ u}。"""
    return np.minimum((cdf <= u[:, None]).sum(axis=1), cdf.shape[1] - 1)


def encode(cb: Codebook, user: int, m: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    在消息 m 的 L 个码字中均匀选择一个，再经预处理得到信道输入：
    i.i.d. 模式逐符号按 P_{X|V}，常组成模式在条件型类上均匀抽取。
    """
    user = _check_user(user)
    params = cb.params
    if not 0 <= int(m) < params.M[user - 1]:
        raise ValidationError(f"消息 {m} 越界 (M{user}={params.M[user - 1]})")
    l = int(rng.integers(params.L[user - 1]))
    v_seq = cb.codeword(user, int(m), l)
    if params.mode == IID:
        cdf = np.cumsum(params.pXgV(user), axis=1)[v_seq]
        x_seq = _inverse_cdf(cdf, rng.random(params.n))
    else:
        x_seq = sample_conditional_type_class(params.joint_type(user), v_seq, rng)
    return v_seq, x_seq


def sample_channel(t: ChannelTensor, x1: np.ndarray, x2: np.ndarray,
                   rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """逐符号从 P(y1,y2,z|x1,x2) 抽取三路输出。"""
    flat = t.probs.reshape(t.sizes[0], t.sizes[1], -1)
    cdf = np.cumsum(flat[np.asarray(x1), np.asarray(x2)], axis=1)
    idx = _inverse_cdf(cdf, rng.random(len(x1)))
    y1, y2, z = np.unravel_index(idx, t.sizes[2:])
    return y1, y2, z


def decoding_table(t: ChannelTensor, params: CodebookParams, user: int) -> np.ndarray:
    """
    接收者 user 的对数似然表 [x_own, v_other, y]：
    P(y|v_other, x_own) = Σ_{x_other} W(y|x1,x2)·P_{X_other|V_other}。
    常组成模式用条件型作为逐符号的 P_{X|V}。
    """
    user = _check_user(user)
    _check_compat(t, params)
    if user == 1:
        lik = np.einsum("aby,vb->avy", t.y1_channel(), params.pXgV(2))
    else:
        lik = np.einsum("aby,va->bvy", t.y2_channel(), params.pXgV(1))
    return _log(lik)


def ml_decode(t: ChannelTensor, cb: Codebook, user: int, y_seq: Sequence[int], own_x: Sequence[int],
              table: Optional[np.ndarray] = None) -> int:
    """
    用户 user 用自己的输入与接收序列对另一用户的全部码字做 ML 判决，
    返回最大似然码字所属的消息；并列时取最小码字下标。
    """
    user = _check_user(user)
    if table is None:
        table = decoding_table(t, cb.params, user)
    other = 3 - user
    y_seq = np.asarray(y_seq, dtype=int)
    own_x = np.asarray(own_x, dtype=int)
    if y_seq.shape != (cb.params.n,) or own_x.shape != (cb.params.n,):
        raise ValidationError("接收序列与自身输入的长度必须等于 n")
    cw = cb.codewords[other - 1]
    scores = table[own_x[None, :], cw, y_seq[None, :]].sum(axis=1)
    return int(np.argmax(scores)) // cb.params.L[other - 1]


# ==============================
# Monte Carlo 错误率
# ==============================
def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    if trials < 1:
        raise ValidationError("试验次数必须为正")
    z = float(norm.ppf(0.5 + confidence / 2.0))
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


class LeakageResult(NamedTuple):
    joint: float
    m1: float
    m2: float


@dataclass
class SimResult:
    trials: int
    errors: int
    estimate: float
    interval: Tuple[float, float]
    leakage: Optional[LeakageResult] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "trials": self.trials,
            "errors": self.errors,
            "estimate": self.estimate,
            "interval": list(self.interval),
            "meta": dict(self.meta),
        }
        if self.leakage is not None:
            out["leakage"] = self.leakage._asdict()
        return out

    csv_header = ["trials", "errors", "estimate", "ci_low", "ci_high", "leak_joint", "leak_m1", "leak_m2"]

    def csv_rows(self) -> List[List[Any]]:
        leak = list(self.leakage) if self.leakage is not None else ["", "", ""]
        return [[self.trials, self.errors, self.estimate, *self.interval, *leak]]


def run_error_trials(t: ChannelTensor, cb: Codebook, trials: Optional[int] = None,
                     seed: Optional[int] = None) -> SimResult:
    """
    每次试验：均匀抽取 (m1, m2)，双方编码，抽取信道输出，双方译码，
    统计并集错误事件 {m1≠m̂1} ∪ {m2≠m̂2}。第 i 次试验使用流 (seed, TRIAL, i)。
    """
    trials = config_manager.config.TRIALS if trials is None else int(trials)
    seed = config_manager.config.SEED if seed is None else int(seed)
    if trials < 1:
        raise ValidationError(f"试验次数必须为正: {trials}")
    params = cb.params
    _check_compat(t, params)
    table1 = decoding_table(t, params, 1)
    table2 = decoding_table(t, params, 2)

    def chunk(start: int, stop: int) -> int:
        errors = 0
        for i in range(start, stop):
            rng = stream(seed, TRIAL_STREAM, i)
            m1 = int(rng.integers(params.M[0]))
            m2 = int(rng.integers(params.M[1]))
            _, x1 = encode(cb, 1, m1, rng)
            _, x2 = encode(cb, 2, m2, rng)
            y1, y2, _ = sample_channel(t, x1, x2, rng)
            m2_hat = ml_decode(t, cb, 1, y1, x1, table1)
            m1_hat = ml_decode(t, cb, 2, y2, x2, table2)
            errors += int(m1_hat != m1 or m2_hat != m2)
        return errors

    start_time = time.time()
    errors = sum(runner.map_chunks(chunk, trials, label="error_trials"))
    result = SimResult(trials, errors, errors / trials, wilson_interval(errors, trials),
                       meta={**params.describe(), "seed": seed, "codebook_seed": cb.seed})
    logger.info(f"✅ 错误率仿真完成: {errors}/{trials}", extra={"extra_data": {
        "n": params.n, "trials": trials, "elapsed": round(time.time() - start_time, 4)}})
    return result


# ==============================
# 输出分布
# ==============================
def _product_law(rows: Sequence[np.ndarray]) -> np.ndarray:
    """逐符号分布的张量积，展平为 |O|^n 向量（首符号为最高位）。"""
    return functools.reduce(np.multiply.outer, rows).ravel()


class _OutputLaws:
    """
    P_{O^n|v1^n,v2^n}（O 为 Z 或 Y），按码字对缓存。
    i.i.d. 模式按单字母预处理复合后做乘积；常组成模式对条件型类成员取平均。
    """

    def __init__(self, params: CodebookParams, w: np.ndarray):
        self.params = params
        self.w = w
        self._cache: Dict[Tuple[Tuple[int, ...], Tuple[int, ...]], np.ndarray] = {}
        self._members: Dict[Tuple[int, Tuple[int, ...]], np.ndarray] = {}
        if params.mode == IID:
            self.wv = np.einsum("ac,bd,cdo->abo", params.pXgV(1), params.pXgV(2), w)

    def members(self, user: int, v_seq: Tuple[int, ...]) -> np.ndarray:
        key = (user, v_seq)
        if key not in self._members:
            self._members[key] = conditional_type_class_members(self.params.joint_type(user), v_seq)
        return self._members[key]

    def __call__(self, v1: Sequence[int], v2: Sequence[int]) -> np.ndarray:
        key = (tuple(int(a) for a in v1), tuple(int(b) for b in v2))
        if key in self._cache:
            return self._cache[key]
        if self.params.mode == IID:
            law = _product_law([self.wv[a, b] for a, b in zip(*key)])
        else:
            xs1 = self.members(1, key[0])
            xs2 = self.members(2, key[1])
            law = sum(_product_law([self.w[a, b] for a, b in zip(r1, r2)]) for r1 in xs1 for r2 in xs2)
            law = law / (len(xs1) * len(xs2))
        self._cache[key] = law
        return law


def _conditional_class_size(jt: JointType) -> int:
    size = 1
    for row in jt.array:
        if row.sum():
            size *= type_class_size(TypeVector(tuple(row)))
    return size


def exact_leakage(t: ChannelTensor, cb: Codebook) -> LeakageResult:
    """
    对随机化下标与预处理精确边缘化得到 P_{Z^n|m1,m2}，在均匀消息下计算
    I(M1,M2;Z^n)、I(M1;Z^n)、I(M2;Z^n)（nats）。
    """
    params = cb.params
    _check_compat(t, params)
    (M1, M2), (L1, L2) = params.M, params.L
    dz = t.sizes[4]
    check_size(dz ** params.n * M1 * L1 * M2 * L2, MAX_LEAKAGE_ENTRIES, "精确泄露枚举（泄露只做精确计算）")
    if params.mode == CONSTANT_COMPOSITION:
        per_pair = _conditional_class_size(params.joint_type(1)) * _conditional_class_size(params.joint_type(2))
        check_size(dz ** params.n * M1 * L1 * M2 * L2 * per_pair, MAX_LEAKAGE_ENTRIES, "常组成精确泄露枚举")

    laws = _OutputLaws(params, t.z_channel())
    pz = np.zeros((M1, M2, dz ** params.n))
    for m1, m2 in itertools.product(range(M1), range(M2)):
        acc = sum(laws(cb.codeword(1, m1, l1), cb.codeword(2, m2, l2))
                  for l1 in range(L1) for l2 in range(L2))
        pz[m1, m2] = acc / (L1 * L2)

    joint = pz / (M1 * M2)
    result = LeakageResult(
        joint=mutual_information(joint.reshape(M1 * M2, -1).T),
        m1=mutual_information(joint.sum(axis=1).T),
        m2=mutual_information(joint.sum(axis=0).T),
    )
    logger.debug("精确泄露计算完成", extra={"extra_data": {"n": params.n, **result._asdict()}})
    return result


# ==============================
# 验证报告
# ==============================
@dataclass
class VerifyReport:
    kind: str
    mode: str
    lhs: float
    rows: List[Dict[str, Any]]
    interval: Optional[Tuple[float, float]] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def all_hold(self) -> bool:
        return all(row["verdict"] for row in self.rows)

    def to_dict(self) -> Dict[str, Any]:
        out = {"kind": self.kind, "mode": self.mode, "lhs": self.lhs, "rows": self.rows,
               "all_hold": self.all_hold, "meta": dict(self.meta)}
        if self.interval is not None:
            out["interval"] = list(self.interval)
        return out

    @property
    def csv_header(self) -> List[str]:
        return list(self.rows[0].keys()) if self.rows else ["s", "lhs", "rhs", "slack", "verdict"]

    def csv_rows(self) -> List[List[Any]]:
        return [[int(v) if isinstance(v, bool) else v for v in row.values()] for row in self.rows]


def _mean_interval(values: np.ndarray, confidence: float = 0.95) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """逐列均值与正态近似置信区间。"""
    k = values.shape[0]
    mean = values.mean(axis=0)
    if k < 2:
        return mean, mean, mean
    half = float(norm.ppf(0.5 + confidence / 2.0)) * values.std(axis=0, ddof=1) / math.sqrt(k)
    return mean, mean - half, mean + half


def _sequence_support(params: CodebookParams, user: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    单个码字的分布：i.i.d. 模式为 V^n 上正概率序列的乘积分布，
    常组成模式为 V 型类上的均匀分布。
    """
    if params.mode == IID:
        pv = params.pV(user)
        check_size(pv.size ** params.n, MAX_REALIZATIONS, f"用户 {user} 码字空间")
        seqs = np.array(list(itertools.product(range(pv.size), repeat=params.n)), dtype=int)
        probs = np.prod(pv[seqs], axis=1)
        keep = probs > 0
        return seqs[keep], probs[keep]
    seqs = type_class_members(params.joint_type(user).v_type)
    return seqs, np.full(len(seqs), 1.0 / len(seqs))


def _x_support(params: CodebookParams, user: int) -> Tuple[np.ndarray, np.ndarray]:
    """接收者自身输入 X^n 的分布：i.i.d. 取 P_X 的乘积，常组成取 X 型类上的均匀分布。"""
    if params.mode == IID:
        px = params.input_law.pX1 if user == 1 else params.input_law.pX2
        check_size(px.size ** params.n, MAX_REALIZATIONS, f"用户 {user} 输入空间")
        seqs = np.array(list(itertools.product(range(px.size), repeat=params.n)), dtype=int)
        probs = np.prod(px[seqs], axis=1)
        keep = probs > 0
        return seqs[keep], probs[keep]
    seqs = type_class_members(params.joint_type(user).x_type)
    return seqs, np.full(len(seqs), 1.0 / len(seqs))


def _renyi_grid(p: np.ndarray, log_q: np.ndarray, s_grid: np.ndarray) -> np.ndarray:
    """对整个 s 网格计算 D_{1+s}(p‖q)。"""
    mask = p > 0
    log_p = np.log(p[mask])
    terms = (1.0 + s_grid)[:, None] * log_p[None, :] - s_grid[:, None] * log_q[mask][None, :]
    return np.maximum(logsumexp(terms, axis=1) / s_grid, 0.0)


def _realization_index(r: int, sizes: Tuple[int, ...]) -> Tuple[int, ...]:
    return tuple(int(i) for i in np.unravel_index(r, sizes))


def _verdict_rows(s_grid: Sequence[float], lhs: np.ndarray, rhs: Sequence[float],
                  tight: Optional[Sequence[float]] = None) -> List[Dict[str, Any]]:
    rows = []
    for i, s in enumerate(s_grid):
        row = {"s": float(s), "lhs": float(lhs[i]), "rhs": float(rhs[i]),
               "slack": float(rhs[i] - lhs[i]), "verdict": bool(lhs[i] <= rhs[i] + VERDICT_SLACK)}
        if tight is not None:
            row["rhs_tight"] = float(tight[i])
            row["verdict_tight"] = bool(lhs[i] <= tight[i] + VERDICT_SLACK)
        rows.append(row)
    return rows


def _make_params(n: int, M: Tuple[int, int], L: Tuple[int, int], law: Optional[JointInputLaw],
                 types: Optional[Tuple[JointType, JointType]]) -> CodebookParams:
    return CodebookParams(n=n, M=M, L=L, law=law, types=types)


# ==============================
# 可解析性界验证
# ==============================
def verify_resolvability(t: ChannelTensor, L1: int, L2: int, n: int, law: Optional[JointInputLaw] = None,
                         types: Optional[Tuple[JointType, JointType]] = None,
                         s_grid: Optional[Sequence[float]] = None, sampled: bool = False,
                         samples: Optional[int] = None, seed: Optional[int] = None,
                         factor_mode: Optional[str] = None) -> VerifyReport:
    """
    比较 E_C[D_{1+s}(P_{Z^n|C} ‖ P_{Z^n})] 与
    i.i.d.：(1/s)·Σ_S L_S^{-s} e^{s·n·I↓_{1+s}(Z;V_S)}（另附 (1/s)·ln(1+Σ) 形式）；
    常组成：ν_n(|X1|)ν_n(|X2|)·(1/s)·Σ_S L_S^{-s} e^{s·n·Ĭ_{1/(1-s)}(Z;V_S)}。
    """
    params = _make_params(n, (1, 1), (L1, L2), law, types)
    _check_compat(t, params)
    open_right = params.mode == CONSTANT_COMPOSITION
    grid = np.asarray(_check_grid(default_s_grid(open_right=open_right) if s_grid is None else s_grid,
                                  open_right=open_right))
    mode_f = factor_mode or config_manager.config.FACTOR_MODE
    laws = _OutputLaws(params, t.z_channel())
    dz = t.sizes[4]
    check_size(dz ** params.n, MAX_LEAKAGE_ENTRIES, "Z^n 空间")

    # 参考分布 P_{Z^n}
    if params.mode == IID:
        pz = compose_effective(t, params.input_law).marginal("z")
        ref = _product_law([pz] * params.n)
    else:
        s1, _ = _sequence_support(params, 1)
        s2, _ = _sequence_support(params, 2)
        check_size(len(s1) * len(s2) * dz ** params.n, MAX_LEAKAGE_ENTRIES, "参考分布枚举")
        ref = sum(laws(a, b) for a in s1 for b in s2) / (len(s1) * len(s2))
    log_ref = _log(ref)

    def divergence(cw1: np.ndarray, cw2: np.ndarray) -> np.ndarray:
        p = sum(laws(a, b) for a in cw1 for b in cw2) / (len(cw1) * len(cw2))
        return _renyi_grid(p, log_ref, grid)

    start_time = time.time()
    interval = None
    bands = None
    if not sampled:
        s1, p1 = _sequence_support(params, 1)
        s2, p2 = _sequence_support(params, 2)
        sizes = (len(s1),) * L1 + (len(s2),) * L2
        total = int(np.prod([float(x) for x in sizes]))
        check_size(total, MAX_REALIZATIONS, "码本实现枚举")

        def chunk(start: int, stop: int) -> np.ndarray:
            acc = np.zeros(grid.size)
            for r in range(start, stop):
                idx = _realization_index(r, sizes)
                i1, i2 = list(idx[:L1]), list(idx[L1:])
                weight = float(np.prod(p1[i1]) * np.prod(p2[i2]))
                acc += weight * divergence(s1[i1], s2[i2])
            return acc

        lhs = np.sum(runner.map_chunks(chunk, total, label="resolvability"), axis=0)
        count = total
    else:
        k = samples or config_manager.config.SAMPLES
        seed = config_manager.config.SEED if seed is None else int(seed)
        values = np.vstack(runner.map(
            lambda i: divergence(*generate_codebook(params, seed, key=(SAMPLE_STREAM, i)).codewords),
            range(k), label="resolvability_sampled"))
        lhs, lo, hi = _mean_interval(values)
        peak = int(np.argmax(lhs))
        interval = (float(lo[peak]), float(hi[peak]))
        bands = (lo, hi)
        count = k

    # 右端
    if params.mode == IID:
        joint = compose_effective(t, params.input_law)
        z12 = joint.marginal("z", "v1", "v2")
        down = [(L1, joint.marginal("z", "v1")), (L2, joint.marginal("z", "v2")),
                (L1 * L2, z12.reshape(z12.shape[0], -1))]
        sums = np.array([sum(size ** (-s) * math.exp(s * params.n * mi_down(j, s)) for size, j in down)
                         for s in grid])
        rhs = sums / grid
        tight = np.log1p(sums) / grid
        factor = 0.0
    else:
        law_t = params.input_law
        joint = compose_effective(t, law_t)
        ch1, pv1 = joint.conditional_channel(("z",), ("v1",))
        ch2, pv2 = joint.conditional_channel(("z",), ("v2",))
        ch12, pv12 = joint.conditional_channel(("z",), ("v1", "v2"))
        ch12 = ch12.reshape(-1, ch12.shape[-1])
        dx1, dx2 = t.sizes[:2]
        factor = log_nu(dx1, params.n, mode_f) + log_nu(dx2, params.n, mode_f)
        sums = []
        for s in grid:
            order = 1.0 / (1.0 - s)
            terms = [(L1, breve_mi(ch1, pv1, order)), (L2, breve_mi(ch2, pv2, order)),
                     (L1 * L2, breve_mi(ch12, pv12.ravel(), order))]
            sums.append(sum(size ** (-s) * math.exp(s * params.n * val) for size, val in terms))
        rhs = math.exp(factor) * np.asarray(sums) / grid
        tight = None

    rows = _verdict_rows(grid, lhs, rhs, tight)
    if bands is not None:
        # 每个 s 各自的样本均值置信区间
        for row, low, high in zip(rows, *bands):
            row["ci_low"], row["ci_high"] = float(low), float(high)
    report = VerifyReport(
        kind="resolvability", mode=params.mode, lhs=float(lhs.max()),
        rows=rows, interval=interval,
        meta={**params.describe(), "sampled": sampled, "realizations": count,
              "log_factor": factor, "factor_mode": mode_f if params.mode == CONSTANT_COMPOSITION else None},
    )
    logger.info(f"✅ 可解析性界验证完成: {'全部成立' if report.all_hold else '存在不成立的 s'}", extra={"extra_data": {
        "n": params.n, "realizations": count, "elapsed": round(time.time() - start_time, 4)}})
    return report


# ==============================
# Gallager 型界验证
# ==============================
def verify_gallager(t: ChannelTensor, N: int, n: int, law: Optional[JointInputLaw] = None,
                    types: Optional[Tuple[JointType, JointType]] = None,
                    s_grid: Optional[Sequence[float]] = None, sampled: bool = False,
                    samples: Optional[int] = None, seed: Optional[int] = None,
                    factor_mode: Optional[str] = None, user: int = 1) -> VerifyReport:
    """
    接收者 user 已知自身输入，用 ML 从 N 个随机码字中译出另一用户的消息。
    比较精确（或抽样）期望错误率与
    i.i.d.：N^s e^{-s·n·I↑_{1/(1+s)}(Y;V|X)}；
    常组成：|T_n(Y×X)|^{1+s} ν_n(|Y||X|)^s ν_n(|X1|)ν_n(|X2|)·N^s e^{-s·n·Ĭ_{1/(1+s)}(Y;V|X)}。
    """
    user = _check_user(user)
    other = 3 - user
    if int(N) < 1:
        raise ValidationError(f"N 必须为正: {N}")
    M = (N, 1) if other == 1 else (1, N)
    params = _make_params(n, M, (1, 1), law, types)
    _check_compat(t, params)
    grid = np.asarray(_check_grid(default_s_grid() if s_grid is None else s_grid))
    mode_f = factor_mode or config_manager.config.FACTOR_MODE
    w = t.y1_channel() if user == 1 else t.y2_channel()       # [x1, x2, y]
    dy = w.shape[2]
    check_size(dy ** params.n, MAX_LEAKAGE_ENTRIES, "Y^n 空间")

    # 以 (x_own, v_other) 为输入的输出分布
    if user == 1:
        w_own = w                                            # [x_own, x_other, y]
    else:
        w_own = np.transpose(w, (1, 0, 2))
    wv = np.einsum("abo,vb->avo", w_own, params.pXgV(other))

    def likelihood(x_own: np.ndarray, v_other: np.ndarray) -> np.ndarray:
        if params.mode == IID:
            return _product_law([wv[a, b] for a, b in zip(x_own, v_other)])
        xs = conditional_type_class_members(params.joint_type(other), v_other)
        return sum(_product_law([w_own[a, b] for a, b in zip(x_own, row)]) for row in xs) / len(xs)

    sx, px = _x_support(params, user)
    sv, pv = _sequence_support(params, other)
    check_size(len(sx) * len(sv) * dy ** params.n, MAX_LEAKAGE_ENTRIES, "似然表")
    lik = np.stack([np.stack([likelihood(a, b) for b in sv]) for a in sx])   # [x, v, y^n]

    def error_of(idx: Sequence[int]) -> float:
        table = lik[:, list(idx), :]                          # [x, N, y^n]
        decoded = np.argmax(table, axis=1)                    # 并列取最小下标
        correct = np.take_along_axis(table, decoded[:, None, :], axis=1)[:, 0, :].sum(axis=1)
        return float(np.dot(px, 1.0 - correct / len(idx)))

    start_time = time.time()
    interval = None
    if not sampled:
        sizes = (len(sv),) * N
        total = int(np.prod([float(x) for x in sizes]))
        check_size(total, MAX_REALIZATIONS, "码本实现枚举")

        def chunk(start: int, stop: int) -> float:
            acc = 0.0
            for r in range(start, stop):
                idx = _realization_index(r, sizes)
                acc += float(np.prod(pv[list(idx)])) * error_of(idx)
            return acc

        lhs_value = float(sum(runner.map_chunks(chunk, total, label="gallager")))
        count = total
    else:
        k = samples or config_manager.config.SAMPLES
        seed = config_manager.config.SEED if seed is None else int(seed)
        index = {tuple(row): i for i, row in enumerate(sv)}

        def sample(i: int) -> float:
            cw = _draw_codewords(params, other, N, seed, (SAMPLE_STREAM, i))
            return error_of([index[tuple(row)] for row in cw])

        values = np.asarray(runner.map(sample, range(k), label="gallager_sampled"))[:, None]
        mean, lo, hi = _mean_interval(values)
        lhs_value = float(mean[0])
        interval = (float(lo[0]), float(hi[0]))
        count = k

    joint = compose_effective(t, params.input_law)
    out_name, v_name, x_name = ("y1", "v2", "x1") if user == 1 else ("y2", "v1", "x2")
    chan, inputs = joint.conditional_channel((out_name,), (v_name, x_name))
    if params.mode == IID:
        factor = 0.0
        rhs = [N ** s * math.exp(-s * params.n * mi_up_conditional(chan, inputs, s)) for s in grid]
    else:
        dx1, dx2 = t.sizes[:2]
        dx_own = dx1 if user == 1 else dx2
        base = log_nu(dx1, params.n, mode_f) + log_nu(dx2, params.n, mode_f)
        rhs = []
        for s in grid:
            factor = (base + (1.0 + s) * log_type_count(dy * dx_own, params.n, mode_f)
                      + s * log_nu(dy * dx_own, params.n, mode_f))
            value = breve_mi_conditional(chan, inputs, 1.0 / (1.0 + s))
            rhs.append(math.exp(factor + s * math.log(N) - s * params.n * value))

    lhs = np.full(grid.size, lhs_value)
    report = VerifyReport(
        kind="gallager", mode=params.mode, lhs=lhs_value, rows=_verdict_rows(grid, lhs, rhs),
        interval=interval,
        meta={"n": params.n, "N": N, "user": user, "sampled": sampled, "realizations": count,
              "factor_mode": mode_f if params.mode == CONSTANT_COMPOSITION else None},
    )
    logger.info(f"✅ Gallager 型界验证完成: {'全部成立' if report.all_hold else '存在不成立的 s'}", extra={"extra_data": {
        "n": params.n, "N": N, "elapsed": round(time.time() - start_time, 4)}})
    return report


# ==============================
# 码长趋势
# ==============================
def sizes_from_rates(rates: RateTuple, n: int) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    """M_i = ⌈e^{nR_i}⌉，L_i = ⌈e^{nr_i}⌉。"""
    up = lambda r: max(1, math.ceil(math.exp(n * r) - 1e-12))
    return (up(rates.R1), up(rates.R2)), (up(rates.r1), up(rates.r2))


def secrecy_trend(t: ChannelTensor, law: JointInputLaw, rates: RateTuple, ns: Sequence[int] = (1, 2, 3, 4),
                  codebooks: int = 50, seed: Optional[int] = None) -> List[Dict[str, Any]]:
    """对每个 n 抽取若干码本，报告精确泄露的中位数。"""
    seed = config_manager.config.SEED if seed is None else int(seed)
    out = []
    for n in ns:
        M, L = sizes_from_rates(rates, n)
        params = CodebookParams(n=n, M=M, L=L, law=law)
        values = runner.map(lambda k: exact_leakage(t, generate_codebook(params, seed, key=(SAMPLE_STREAM, n, k))),
                            range(codebooks), label="secrecy_trend")
        arr = np.asarray(values)
        out.append({"n": n, "M": list(M), "L": list(L),
                    "median_joint": float(np.median(arr[:, 0])),
                    "median_m1": float(np.median(arr[:, 1])),
                    "median_m2": float(np.median(arr[:, 2]))})
        logger.info(f"泄露趋势 n={n}", extra={"extra_data": out[-1]})
    return out


def error_trend(t: ChannelTensor, law: JointInputLaw, rates: RateTuple, ns: Sequence[int] = (2, 4, 6),
                codebooks: int = 20, trials: Optional[int] = None, seed: Optional[int] = None) -> List[Dict[str, Any]]:
    """对每个 n 在若干新码本上平均 Monte Carlo 错误率。"""
    seed = config_manager.config.SEED if seed is None else int(seed)
    trials = config_manager.config.TRIALS if trials is None else int(trials)
    out = []
    for n in ns:
        M, L = sizes_from_rates(rates, n)
        params = CodebookParams(n=n, M=M, L=L, law=law)
        estimates = [run_error_trials(t, generate_codebook(params, seed, key=(SAMPLE_STREAM, n, k)),
                                      trials, seed=seed + k).estimate
                     for k in range(codebooks)]
        out.append({"n": n, "M": list(M), "L": list(L), "error": float(np.mean(estimates))})
        logger.info(f"错误率趋势 n={n}", extra={"extra_data": out[-1]})
    return out
