"""
测试公共夹具：随机信道、二元加性信道、配置隔离。
"""
import os
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.abspath(__file__))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from twwclab.channel import AdditiveChannelSpec, ChannelTensor, additive_to_tensor  # noqa: E402
from twwclab.config import config_manager  # noqa: E402

ALL_ONES = {"a1": 1, "b1": 1, "a2": 1, "b2": 1, "a3": 1, "b3": 1}


def random_pmf(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """最后一个轴归一化的随机分布，所有项严格为正。"""
    arr = rng.uniform(0.05, 1.0, size=shape)
    return arr / arr.sum(axis=-1, keepdims=True)


def binary_spec(p1: float = 0.05, p2: float = 0.05, p3: float = 0.25, q: int = 2) -> AdditiveChannelSpec:
    noise = []
    for p in (p1, p2, p3):
        row = [1.0 - p] + [p / (q - 1)] * (q - 1)
        noise.append(row)
    return AdditiveChannelSpec(q=q, coeffs=dict(ALL_ONES), noise=noise)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def make_pmf():
    return random_pmf


@pytest.fixture
def additive_spec():
    """二元加性信道工厂，参数为三个噪声的翻转概率。"""
    return binary_spec


@pytest.fixture
def additive_tensor():
    def factory(p1: float = 0.05, p2: float = 0.05, p3: float = 0.25) -> ChannelTensor:
        return additive_to_tensor(binary_spec(p1, p2, p3))
    return factory


@pytest.fixture
def random_tensor():
    """随机信道张量工厂，sizes 为 [|X1|,|X2|,|Y1|,|Y2|,|Z|]。"""
    def factory(rng: np.random.Generator, sizes=(2, 2, 2, 2, 2)) -> ChannelTensor:
        d1, d2, e1, e2, f = sizes
        flat = random_pmf(rng, d1, d2, e1 * e2 * f)
        return ChannelTensor(flat.reshape(d1, d2, e1, e2, f)).require_valid()
    return factory


@pytest.fixture(autouse=True)
def isolated_config(monkeypatch):
    """每个测试结束后按 config.json 与环境变量重新加载配置。"""
    monkeypatch.delenv("TWWC_THREADS", raising=False)
    config_manager.reload()
    yield config_manager
    monkeypatch.undo()
    config_manager.reload()
