"""
实验规格解析：把 JSON 规格文件转换为信道、输入律、联合型、速率与线性系统对象。
所有解析失败都抛出 ValidationError（命令行映射为退出码 2）。
"""
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Extra, validator

from twwclab.channel import (
    AdditiveChannelSpec,
    ChannelTensor,
    CostSpec,
    GaussianChannelSpec,
    JointInputLaw,
    additive_to_tensor,
)
from twwclab.errors import ValidationError
from twwclab.exponents import RateTuple
from twwclab.polytope import LinearSystem
from twwclab.regions import TimeSharingPlan
from twwclab.typelib import JointType

logger = logging.getLogger(__name__)

CHANNEL_KINDS = ("tensor", "marginals", "additive", "gaussian")
MODES = ("iid", "constant_composition")

Channel = Union[ChannelTensor, AdditiveChannelSpec, GaussianChannelSpec]


class ExperimentSpec(BaseModel):
    """实验规格文件的顶层结构，未知字段直接拒绝。"""
    channel: Dict[str, Any]
    law: Optional[Dict[str, Any]] = None
    types: Optional[Dict[str, List[List[int]]]] = None
    rates: Optional[Dict[str, float]] = None
    n: Optional[int] = None
    M: Optional[Tuple[int, int]] = None
    L: Optional[Tuple[int, int]] = None
    N: Optional[int] = None
    user: int = 1
    trials: Optional[int] = None
    samples: Optional[int] = None
    sampled: bool = False
    mode: str = "iid"
    flavor: str = "joint"
    budgets: Optional[Tuple[float, float]] = None
    powers: Optional[Tuple[float, float]] = None
    cost: Optional[Dict[str, Any]] = None
    plan: Optional[Dict[str, Any]] = None
    law_grid: Optional[int] = None
    leakage: bool = False
    ensemble: bool = False
    seed: Optional[int] = None

    class Config:
        extra = Extra.forbid
        allow_mutation = False

    @validator("mode")
    def _mode(cls, v):
        if v not in MODES:
            raise ValueError(f"未知的码本模式: {v}，可选 {MODES}")
        return v

    @validator("channel")
    def _kind(cls, v):
        if v.get("kind") not in CHANNEL_KINDS:
            raise ValueError(f"channel.kind 必须是 {CHANNEL_KINDS} 之一，实际 {v.get('kind')!r}")
        return v

    @validator("user")
    def _user(cls, v):
        if v not in (1, 2):
            raise ValueError(f"user 只能为 1 或 2: {v}")
        return v


def parse_spec(data: Dict[str, Any]) -> ExperimentSpec:
    """pydantic 校验失败转为 ValidationError，消息中给出字段路径。"""
    try:
        return ExperimentSpec(**data)
    except ValueError as e:
        raise ValidationError(f"实验规格不合法: {e}")
    except TypeError as e:
        raise ValidationError(f"实验规格不合法: {e}")


# ==============================
# 信道
# ==============================
def parse_channel(data: Dict[str, Any]) -> Channel:
    kind = data.get("kind")
    body = {k: v for k, v in data.items() if k != "kind"}
    try:
        if kind == "tensor":
            return ChannelTensor.from_flat(body["sizes"], body["probs"]).require_valid()
        if kind == "marginals":
            parts = [np.asarray(body[k], dtype=float) for k in ("y1", "y2", "z")]
            return ChannelTensor.from_marginals(*parts).require_valid()
        if kind == "additive":
            return AdditiveChannelSpec(**body)
        if kind == "gaussian":
            return GaussianChannelSpec(**body)
    except KeyError as e:
        raise ValidationError(f"{kind} 信道缺少字段: {e}")
    except ValidationError:
        raise
    except (ValueError, TypeError) as e:
        raise ValidationError(f"{kind} 信道参数不合法: {e}")
    raise ValidationError(f"未知的信道类型: {kind!r}")


def channel_tensor(channel: Channel) -> ChannelTensor:
    """离散信道统一为张量；高斯信道只支持区域计算。"""
    if isinstance(channel, ChannelTensor):
        return channel
    if isinstance(channel, AdditiveChannelSpec):
        return additive_to_tensor(channel)
    raise ValidationError("高斯信道没有离散张量形式，只能用于 region 命令")


# ==============================
# 输入律、联合型、速率
# ==============================
def parse_law(data: Optional[Dict[str, Any]], t: Optional[ChannelTensor] = None) -> JointInputLaw:
    """
    {"pV1","pX1gV1","pV2","pX2gV2"} 为一般预处理，{"pX1","pX2"} 为 V=X；
    未给出时取信道输入字母表上的均匀恒等律。
    """
    if data is None:
        if t is None:
            raise ValidationError("缺少输入律 law")
        return JointInputLaw.uniform(*t.sizes[:2])
    try:
        if "pX1" in data or "pX2" in data:
            return JointInputLaw.identity(data["pX1"], data["pX2"])
        return JointInputLaw(data["pV1"], data["pX1gV1"], data["pV2"], data["pX2gV2"])
    except KeyError as e:
        raise ValidationError(f"输入律缺少字段: {e}")


def parse_types(data: Optional[Dict[str, Any]]) -> Tuple[JointType, JointType]:
    if not data:
        raise ValidationError("常组成模式需要 types.V1X1 与 types.V2X2")
    try:
        return JointType(tuple(map(tuple, data["V1X1"]))), JointType(tuple(map(tuple, data["V2X2"])))
    except KeyError as e:
        raise ValidationError(f"types 缺少字段: {e}")


def parse_rates(data: Optional[Dict[str, float]]) -> RateTuple:
    if data is None:
        raise ValidationError("缺少速率 rates")
    try:
        return RateTuple(**data)
    except ValueError as e:
        raise ValidationError(f"速率不合法: {e}")


def parse_cost(data: Optional[Dict[str, Any]]) -> Optional[CostSpec]:
    if data is None:
        return None
    try:
        return CostSpec(**data)
    except ValueError as e:
        raise ValidationError(f"成本约束不合法: {e}")


def parse_plan(data: Optional[Dict[str, Any]]) -> Optional[TimeSharingPlan]:
    if data is None:
        return None
    try:
        return TimeSharingPlan(**data)
    except ValueError as e:
        raise ValidationError(f"时分方案不合法: {e}")


def parse_s_grid(text: Optional[str]) -> Optional[Union[int, List[float]]]:
    """
    --s-grid 取值：整数表示网格点数，逗号分隔的小数表示显式网格。

    :return: None、网格点数或显式网格。
    """
    if text is None or text == "":
        return None
    try:
        if "," not in text and "." not in text:
            size = int(text)
            if size < 1:
                raise ValidationError(f"网格点数必须为正: {size}")
            return size
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise ValidationError(f"无法解析 --s-grid={text!r}: {e}")


# ==============================
# 线性系统
# ==============================
def parse_system(data: Dict[str, Any], eliminate: Optional[Sequence[str]] = None) -> Tuple[LinearSystem, List[str]]:
    """解析线性系统文件；命令行给出的消元列表优先于文件中的 eliminate。"""
    system = LinearSystem.from_dict(data)
    order = list(eliminate) if eliminate is not None else list(data.get("eliminate", []))
    unknown = [v for v in order if v not in system.variables]
    if unknown:
        raise ValidationError(f"消元列表含未知变量: {unknown}")
    return system, order
