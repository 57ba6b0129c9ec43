"""
二维速率区域多面体与线性不等式系统。

RateRegion2D 以半空间 α·R1 + β·R2 ≤ γ 存储（非负象限隐含），
顶点按逆时针顺序给出。LinearSystem 支持有理数精确的 Fourier-Motzkin 消元。
"""
import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from twwclab.errors import ValidationError

logger = logging.getLogger(__name__)

# 顶点与半空间一致性容差
VERTEX_TOL = 1e-9
# 平行判定的行列式阈值
DET_TOL = 1e-12
# 浮点系统的支配判定容差
FLOAT_TOL = 1e-9

Halfspace = Tuple[float, float, float]
Number = Union[Fraction, float]


# ==============================
# 凸包与顶点枚举
# ==============================
def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def monotone_chain(points: Iterable[Sequence[float]]) -> np.ndarray:
    """Andrew 单调链凸包，逆时针、去共线点，从最左下点开始。"""
    pts = sorted({(round(float(p[0]), 12) + 0.0, round(float(p[1]), 12) + 0.0) for p in points})
    if len(pts) <= 2:
        return np.asarray(pts, dtype=float).reshape(-1, 2)
    lower: List[Tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 1e-14:
            lower.pop()
        lower.append(p)
    upper: List[Tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 1e-14:
            upper.pop()
        upper.append(p)
    return np.asarray(lower[:-1] + upper[:-1], dtype=float)


NONNEGATIVE: Tuple[Halfspace, ...] = ((-1.0, 0.0, 0.0), (0.0, -1.0, 0.0))


def halfspace_vertices(halfspaces: Sequence[Halfspace], nonnegative: bool = True) -> np.ndarray:
    """两两求交 + 可行性过滤 + 凸包排序；平行对按行列式阈值跳过。"""
    hs = list(halfspaces) + (list(NONNEGATIVE) if nonnegative else [])
    a = np.asarray([h[:2] for h in hs], dtype=float).reshape(-1, 2)
    g = np.asarray([h[2] for h in hs], dtype=float)
    candidates = []
    for i, j in itertools.combinations(range(len(hs)), 2):
        m = a[[i, j]]
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if abs(det) < DET_TOL:
            continue
        point = np.linalg.solve(m, g[[i, j]])
        if np.all(a @ point <= g + VERTEX_TOL):
            candidates.append(point)
    if not candidates:
        return np.zeros((0, 2))
    return monotone_chain(candidates)


def hull_halfspaces(hull: np.ndarray) -> List[Halfspace]:
    """由逆时针凸包得到速率半空间（坐标轴上的边省略，非负性隐含）。"""
    if hull.shape[0] == 0:
        return []
    if hull.shape[0] <= 2:
        return [(1.0, 0.0, float(hull[:, 0].max())), (0.0, 1.0, float(hull[:, 1].max()))]
    out: List[Halfspace] = []
    k = hull.shape[0]
    for i in range(k):
        p, q = hull[i], hull[(i + 1) % k]
        alpha, beta = q[1] - p[1], -(q[0] - p[0])
        scale = max(abs(alpha), abs(beta))
        alpha, beta = alpha / scale, beta / scale
        gamma = alpha * p[0] + beta * p[1]
        if (alpha <= 0 and beta <= 0) and abs(gamma) <= VERTEX_TOL:
            continue
        out.append((float(alpha), float(beta), float(gamma)))
    return out


# ==============================
# 速率区域
# ==============================
@dataclass(frozen=True, eq=False)
class RateRegion2D:
    halfspaces: Tuple[Halfspace, ...]
    vertices: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_halfspaces(cls, halfspaces: Sequence[Halfspace], meta: Optional[Dict[str, Any]] = None) -> "RateRegion2D":
        hs = tuple((float(a), float(b), float(c)) for a, b, c in halfspaces)
        return cls(hs, halfspace_vertices(hs), dict(meta or {}))

    @classmethod
    def from_points(cls, points: Iterable[Sequence[float]], meta: Optional[Dict[str, Any]] = None) -> "RateRegion2D":
        pts = [(float(p[0]), float(p[1])) for p in points]
        if not pts:
            return cls.empty(meta)
        # 速率区域向下封闭：补上各点在坐标轴上的投影
        shadows = [(x, 0.0) for x, _ in pts] + [(0.0, y) for _, y in pts]
        hull = monotone_chain(pts + shadows + [(0.0, 0.0)])
        return cls(tuple(hull_halfspaces(hull)), hull, dict(meta or {}))

    @classmethod
    def empty(cls, meta: Optional[Dict[str, Any]] = None) -> "RateRegion2D":
        meta = dict(meta or {})
        meta.setdefault("flag", "empty")
        return cls((), np.zeros((0, 2)), meta)

    @property
    def is_empty(self) -> bool:
        return self.vertices.shape[0] == 0

    def contains(self, point: Sequence[float], tol: float = VERTEX_TOL) -> bool:
        if self.is_empty:
            return False
        r1, r2 = float(point[0]), float(point[1])
        if r1 < -tol or r2 < -tol:
            return False
        return all(a * r1 + b * r2 <= c + tol for a, b, c in self.halfspaces)

    def issubset(self, other: "RateRegion2D", tol: float = VERTEX_TOL) -> bool:
        return all(other.contains(v, tol) for v in self.vertices)

    def same_as(self, other: "RateRegion2D", tol: float = VERTEX_TOL) -> bool:
        """逐顶点比较（两者都按逆时针、从原点开始）。"""
        if self.vertices.shape != other.vertices.shape:
            return False
        return bool(np.all(np.abs(self.vertices - other.vertices) <= tol))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "halfspaces": [list(h) for h in self.halfspaces],
            "vertices": self.vertices.tolist(),
            "meta": dict(self.meta),
        }

    def csv_rows(self) -> List[List[float]]:
        return self.vertices.tolist()


def minkowski_combination(regions: Sequence[RateRegion2D], weights: Sequence[float],
                          meta: Optional[Dict[str, Any]] = None) -> RateRegion2D:
    """Σ_j w_j·R_j 的加权闵可夫斯基和，逐段两两求和后取凸包。"""
    current = np.zeros((1, 2))
    for region, w in zip(regions, weights):
        if region.is_empty:
            return RateRegion2D.empty(meta)
        sums = (current[:, None, :] + float(w) * region.vertices[None, :, :]).reshape(-1, 2)
        current = monotone_chain(sums)
    return RateRegion2D.from_points(current, meta)


# ==============================
# 线性不等式系统
# ==============================
SENSES = ("<", "<=", ">", ">=")


def parse_number(value: Any) -> Number:
    """整数与十进制/分数字符串解析为 Fraction，浮点保持浮点。"""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValidationError(f"非法数值: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise ValidationError(f"无法解析数值 {value!r}: {e}")
    if isinstance(value, float):
        if not np.isfinite(value):
            raise ValidationError(f"非有限数值: {value}")
        return value
    raise ValidationError(f"非法数值类型: {type(value).__name__}")


def format_number(value: Number) -> str:
    if isinstance(value, Fraction):
        return str(value)
    return format(float(value), ".12g")


@dataclass(frozen=True)
class Inequality:
    """Σ coeffs·x (sense) constant。"""
    coeffs: Tuple[Number, ...]
    sense: str
    constant: Number

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ValidationError(f"未知不等号: {self.sense}")

    @property
    def strict(self) -> bool:
        return self.sense in ("<", ">")

    def upper_form(self) -> "Inequality":
        """统一为 ≤ / < 形式。"""
        if self.sense in ("<", "<="):
            return self
        return Inequality(tuple(-c for c in self.coeffs), "<" if self.strict else "<=", -self.constant)

    def canonical(self) -> Tuple[Tuple[Number, ...], bool, Number]:
        """≤ 形式且首个非零系数绝对值为 1，用于比较与去重。"""
        row = self.upper_form()
        lead = next((c for c in row.coeffs if c != 0), None)
        if lead is None:
            return row.coeffs, row.strict, row.constant
        scale = abs(lead)
        return tuple(c / scale for c in row.coeffs), row.strict, row.constant / scale

    def holds(self, point: Sequence[Number]) -> bool:
        lhs = sum(c * x for c, x in zip(self.coeffs, point))
        return {"<": lhs < self.constant, "<=": lhs <= self.constant,
                ">": lhs > self.constant, ">=": lhs >= self.constant}[self.sense]


@dataclass(frozen=True)
class LinearSystem:
    variables: Tuple[str, ...]
    inequalities: Tuple[Inequality, ...]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        if len(set(self.variables)) != len(self.variables):
            raise ValidationError(f"变量名重复: {self.variables}")
        for ineq in self.inequalities:
            if len(ineq.coeffs) != len(self.variables):
                raise ValidationError(f"系数维度 {len(ineq.coeffs)} 与变量个数 {len(self.variables)} 不符")

    @property
    def is_exact(self) -> bool:
        return all(isinstance(c, Fraction) for ineq in self.inequalities for c in (*ineq.coeffs, ineq.constant))

    def is_infeasible(self) -> bool:
        """存在形如 0 < c 且不成立的行。"""
        return any(_row_contradiction(_Row.of(ineq), not self.is_exact) for ineq in self.inequalities
                   if all(c == 0 for c in ineq.coeffs))

    def satisfied_by(self, point: Dict[str, Number]) -> bool:
        values = [point[v] for v in self.variables]
        return all(ineq.holds(values) for ineq in self.inequalities)

    def canonical_set(self) -> set:
        return {ineq.canonical() for ineq in self.inequalities}

    def render(self) -> List[str]:
        lines = []
        for ineq in self.inequalities:
            terms = []
            for name, c in zip(self.variables, ineq.coeffs):
                if c == 0:
                    continue
                sign = "-" if c < 0 else "+"
                mag = abs(c)
                body = name if mag == 1 else f"{format_number(mag)}*{name}"
                terms.append(f"{sign} {body}")
            lhs = " ".join(terms).lstrip("+ ") if terms else "0"
            if lhs.startswith("- "):
                lhs = "-" + lhs[2:]
            lines.append(f"{lhs} {ineq.sense} {format_number(ineq.constant)}")
        return lines

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LinearSystem":
        try:
            variables = [str(v) for v in data["variables"]]
            raw = data["inequalities"]
        except (KeyError, TypeError) as e:
            raise ValidationError(f"线性系统缺少字段: {e}")
        rows = []
        for item in raw:
            coeffs = item.get("coeffs", {})
            unknown = [k for k in coeffs if k not in variables]
            if unknown:
                raise ValidationError(f"不等式引用了未声明的变量: {unknown}")
            vec = [parse_number(coeffs.get(v, 0)) for v in variables]
            rows.append(Inequality(tuple(vec), item.get("sense", "<="), parse_number(item.get("constant", 0))))
        system = cls(tuple(variables), tuple(rows))
        return system if system.is_exact else system.as_float()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variables": list(self.variables),
            "inequalities": [
                {
                    "coeffs": {v: format_number(c) for v, c in zip(self.variables, ineq.coeffs) if c != 0},
                    "sense": ineq.sense,
                    "constant": format_number(ineq.constant),
                }
                for ineq in self.inequalities
            ],
            "rendered": self.render(),
        }

    def substitute(self, values: Dict[str, Number]) -> "LinearSystem":
        """把给定变量代入常数项并删去对应列；出现浮点值时整个系统转为浮点。"""
        unknown = [v for v in values if v not in self.variables]
        if unknown:
            raise ValidationError(f"未知变量: {unknown}")
        floating = not self.is_exact or any(not isinstance(v, (Fraction, int)) for v in values.values())
        keep = [i for i, v in enumerate(self.variables) if v not in values]
        rows = []
        for ineq in self.inequalities:
            constant = ineq.constant - sum(ineq.coeffs[self.variables.index(v)] * x for v, x in values.items())
            rows.append(Inequality(tuple(ineq.coeffs[i] for i in keep), ineq.sense, constant))
        system = LinearSystem(tuple(self.variables[i] for i in keep), tuple(rows))
        return system.as_float() if floating else system

    def extended(self, inequalities: Sequence[Inequality]) -> "LinearSystem":
        return LinearSystem(self.variables, self.inequalities + tuple(inequalities))

    def as_float(self) -> "LinearSystem":
        rows = tuple(Inequality(tuple(float(c) for c in i.coeffs), i.sense, float(i.constant)) for i in self.inequalities)
        return LinearSystem(self.variables, rows)


# ==============================
# Fourier-Motzkin
# ==============================
@dataclass(frozen=True)
class _Row:
    """≤ 形式的内部行：Σ coeffs·x (< 或 ≤) constant。"""
    coeffs: Tuple[Number, ...]
    constant: Number
    strict: bool

    @classmethod
    def of(cls, ineq: Inequality) -> "_Row":
        up = ineq.upper_form()
        return cls(up.coeffs, up.constant, up.strict)

    def to_inequality(self) -> Inequality:
        return Inequality(self.coeffs, "<" if self.strict else "<=", self.constant)


def _row_contradiction(row: _Row, floating: bool) -> bool:
    """全零行 0 (<|≤) c 是否矛盾。"""
    tol = FLOAT_TOL if floating else 0
    if row.strict:
        return row.constant <= tol
    return row.constant < -tol


def _combine(p: _Row, q: _Row, k: int, floating: bool) -> _Row:
    a, b = p.coeffs[k], -q.coeffs[k]
    coeffs = tuple((x / a + y / b) for x, y in zip(p.coeffs, q.coeffs))
    if floating:
        coeffs = tuple(0.0 if i == k or abs(c) <= FLOAT_TOL * 1e-3 else c for i, c in enumerate(coeffs))
    return _Row(coeffs, p.constant / a + q.constant / b, p.strict or q.strict)


def _dominance_prune(rows: Sequence[_Row], floating: bool) -> List[_Row]:
    """同方向行只保留最紧的一条（常数相同时保留严格不等式）；去掉恒真行。"""
    best: Dict[Tuple, _Row] = {}
    order: List[Tuple] = []
    contradictions: List[_Row] = []
    for row in rows:
        lead = next((c for c in row.coeffs if (abs(c) > FLOAT_TOL * 1e-3 if floating else c != 0)), None)
        if lead is None:
            if _row_contradiction(row, floating):
                contradictions.append(_Row(tuple(0 * c for c in row.coeffs), row.constant, row.strict))
            continue
        scale = abs(lead)
        coeffs = tuple(c / scale for c in row.coeffs)
        normalized = _Row(coeffs, row.constant / scale, row.strict)
        key = tuple(round(c, 9) for c in coeffs) if floating else coeffs
        if key not in best:
            best[key] = normalized
            order.append(key)
            continue
        cur = best[key]
        tol = FLOAT_TOL if floating else 0
        if normalized.constant < cur.constant - tol:
            best[key] = normalized
        elif abs(normalized.constant - cur.constant) <= tol and normalized.strict and not cur.strict:
            best[key] = normalized
    if contradictions:
        return contradictions[:1] + [best[k] for k in order]
    return [best[k] for k in order]


def _eliminate(rows: Sequence[_Row], k: int, floating: bool) -> List[_Row]:
    pos = [r for r in rows if r.coeffs[k] > 0]
    neg = [r for r in rows if r.coeffs[k] < 0]
    out = [r for r in rows if r.coeffs[k] == 0]
    for p in pos:
        for q in neg:
            out.append(_combine(p, q, k, floating))
    return _dominance_prune(out, floating)


def _feasible(rows: Sequence[_Row], active: Sequence[int], floating: bool) -> bool:
    """通过逐个消元判断（低维）系统是否可行。"""
    current = _dominance_prune(rows, floating)
    for k in active:
        if any(all(c == 0 for c in r.coeffs) for r in current):
            break
        current = _eliminate(current, k, floating)
    return not any(all(c == 0 for c in r.coeffs) and _row_contradiction(r, floating) for r in current)


def _negate(row: _Row) -> _Row:
    return _Row(tuple(-c for c in row.coeffs), -row.constant, not row.strict)


def _prune_planar(rows: List[_Row], floating: bool) -> List[_Row]:
    """至多两个活跃变量时，逐行检查“其余行 ∧ 该行取反”是否可行，不可行即冗余。"""
    active = [k for k in range(len(rows[0].coeffs)) if any(r.coeffs[k] != 0 for r in rows)] if rows else []
    if not rows or len(active) > 2:
        return rows
    if any(all(c == 0 for c in r.coeffs) for r in rows):
        return rows
    kept = list(rows)
    i = 0
    while i < len(kept):
        others = kept[:i] + kept[i + 1:]
        if others and not _feasible(others + [_negate(kept[i])], active, floating):
            kept = others
        else:
            i += 1
    return kept


def fourier_motzkin(system: LinearSystem, eliminate: Sequence[str]) -> LinearSystem:
    """
    依次消去 eliminate 中的变量，返回在剩余变量上的投影。
    严格与非严格组合得严格；冗余行由同向支配与二维可行性检查去除。
    """
    unknown = [v for v in eliminate if v not in system.variables]
    if unknown:
        raise ValidationError(f"未知变量: {unknown}")
    if not eliminate:
        return system
    floating = not system.is_exact
    rows = [_Row.of(ineq) for ineq in system.inequalities]
    eliminated = 0
    for name in eliminate:
        k = system.variables.index(name)
        if all(r.coeffs[k] == 0 for r in rows):
            logger.debug(f"变量 {name} 未出现，跳过")
            continue
        before = len(rows)
        rows = _eliminate(rows, k, floating)
        eliminated += 1
        logger.debug(f"消去变量 {name}", extra={"extra_data": {"rows_before": before, "rows_after": len(rows)}})

    keep = [i for i, v in enumerate(system.variables) if v not in eliminate]
    if not eliminated:
        # 未发生消元：只去掉对应列，行保持原样
        variables = tuple(system.variables[i] for i in keep)
        return LinearSystem(variables, tuple(
            Inequality(tuple(ineq.coeffs[i] for i in keep), ineq.sense, ineq.constant)
            for ineq in system.inequalities))
    rows = [_Row(tuple(r.coeffs[i] for i in keep), r.constant, r.strict) for r in rows]
    rows = _prune_planar(rows, floating)
    variables = tuple(system.variables[i] for i in keep)
    return LinearSystem(variables, tuple(r.to_inequality() for r in rows))


def reduce_system(system: LinearSystem) -> LinearSystem:
    """不消元，只做支配去重与（二维时的）冗余行剔除。"""
    floating = not system.is_exact
    rows = _dominance_prune([_Row.of(ineq) for ineq in system.inequalities], floating)
    rows = _prune_planar(rows, floating)
    return LinearSystem(system.variables, tuple(r.to_inequality() for r in rows))
