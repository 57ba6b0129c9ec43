import logging
import logging.handlers
import json
import os
import sys
import time
from typing import Any, Dict, Union


class JsonFormatter(logging.Formatter):
    """
    将日志记录格式化为 JSON 字符串的格式化器。
    """
    def format(self, record: logging.LogRecord) -> str:
        # 基础字段
        log_record: Dict[str, Any] = {
            "timestamp": time.strftime("%Y-%m-%d %H:%M:%S", time.localtime(record.created)),
            "level": record.levelname,
            "module": record.name,
            "funcName": record.funcName,
            "lineno": record.lineno,
            "message": str(record.getMessage()),
        }

        # 结构化上下文（n、网格规模、残差、耗时等）
        extra_data = getattr(record, "extra_data", None)
        if isinstance(extra_data, dict):
            for key, value in extra_data.items():
                log_record.setdefault(key, value)

        if record.exc_info:
            log_record["exc_info"] = self.formatException(record.exc_info)
        if record.stack_info:
            log_record["stack_info"] = self.formatStack(record.stack_info)

        return json.dumps(log_record, ensure_ascii=False, default=str)


def setup_logging(log_file_path: str, log_level: Union[int, str] = logging.INFO, console: bool = True):
    """
    设置全局日志系统：文件轮转（JSON）+ 控制台（stderr，可读格式）。
    stdout 保留给产物输出。
    """
    if isinstance(log_level, str):
        log_level = logging.getLevelName(log_level.upper())
        if not isinstance(log_level, int):
            log_level = logging.INFO

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)

    # 移除所有现有处理器，防止重复
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)
        handler.close()

    # 1. 文件轮转处理器，10MB * 5 个文件
    log_dir = os.path.dirname(log_file_path)
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
    file_handler = logging.handlers.RotatingFileHandler(
        log_file_path,
        maxBytes=10 * 1024 * 1024,
        backupCount=5,
        encoding="utf-8",
    )
    file_handler.setFormatter(JsonFormatter())
    root_logger.addHandler(file_handler)

    # 2. 控制台处理器
    if console:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(logging.Formatter(
            "%(asctime)s - %(levelname)s - %(name)s - %(message)s"
        ))
        root_logger.addHandler(console_handler)

    # numpy/scipy 之外的第三方库日志压低
    logging.getLogger("dotenv").setLevel(logging.WARNING)
    logging.getLogger("asyncio").setLevel(logging.WARNING)

# 示例：结构化日志的使用
# logger.info("区域计算完成", extra={'extra_data': {'n_laws': 81, 'elapsed': 0.42}})
