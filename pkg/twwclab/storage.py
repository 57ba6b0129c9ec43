import csv
import hashlib
import io
import json
import os
import tempfile
import logging
from typing import Any, Dict, Iterable, Optional, Sequence

import numpy as np

from twwclab.config import config_manager
from twwclab.errors import ValidationError

logger = logging.getLogger(__name__)


def round_sig(value: float, digits: Optional[int] = None) -> float:
    """保留有效数字（默认取配置 OUTPUT_DIGITS），JSON 与 CSV 共用。"""
    digits = digits or config_manager.config.OUTPUT_DIGITS
    value = float(value)
    if not np.isfinite(value):
        return value
    return float(format(value, f".{digits}g"))


def normalize_numbers(obj: Any, digits: Optional[int] = None) -> Any:
    """递归地把浮点数取整到有效数字，numpy 标量与数组转为内置类型。"""
    if isinstance(obj, dict):
        return {str(k): normalize_numbers(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize_numbers(v, digits) for v in obj]
    if isinstance(obj, np.ndarray):
        return normalize_numbers(obj.tolist(), digits)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return round_sig(float(obj), digits)
    return obj


class ArtifactStore:
    """
    负责产物文件写入与输入规格读取的存储管理器。
    所有写入都先写同目录临时文件再 os.replace，读者不会看到半个文件。
    """

    def _atomic_write(self, path: str, text: str) -> str:
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(prefix=".twwc-", suffix=".tmp", dir=directory)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
                f.write(text)
            os.replace(tmp_path, path)
        except OSError:
            if os.path.exists(tmp_path):
                os.remove(tmp_path)
            logger.error(f"❌ 写入产物失败: {path}", exc_info=True)
            raise
        logger.info(f"💾 产物已写入: {path}", extra={"extra_data": {"bytes": len(text.encode("utf-8"))}})
        return path

    # --- 写入 ---

    def write_text(self, path: str, text: str) -> str:
        return self._atomic_write(path, text)

    def write_json(self, path: str, payload: Dict[str, Any]) -> str:
        return self._atomic_write(path, self.dumps(payload))

    def write_csv(self, path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
        return self._atomic_write(path, self.csv_text(header, rows))

    @staticmethod
    def dumps(payload: Dict[str, Any]) -> str:
        """稳定的 JSON 序列化（键排序，数字按有效数字取整）。"""
        return json.dumps(normalize_numbers(payload), ensure_ascii=False, indent=2, sort_keys=True) + "\n"

    @staticmethod
    def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in normalize_numbers(list(row))])
        return buf.getvalue()

    # --- 读取 ---

    def read_text(self, path: str) -> str:
        if not os.path.exists(path):
            raise ValidationError(f"输入文件不存在: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                return f.read()
        except OSError as e:
            raise ValidationError(f"无法读取输入文件 {path}: {e}")

    def read_json(self, path: str) -> Dict[str, Any]:
        """
        读取 JSON 规格文件。

        :return: 解析后的字典；文件缺失或 JSON 不合法时抛出 ValidationError。
        """
        text = self.read_text(path)
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValidationError(f"JSON 解析失败 {path}: {e}")
        if not isinstance(data, dict):
            raise ValidationError(f"规格文件顶层必须是对象: {path}")
        return data

    @staticmethod
    def digest(text: str) -> str:
        """输入规格的 sha256，写入 meta.input_sha256 以便溯源。"""
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


# 全局存储管理器实例
artifact_store = ArtifactStore()
