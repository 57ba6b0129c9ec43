import os
import json
import logging
from typing import Dict, Any, Optional
from pydantic import BaseModel, validator
from dotenv import load_dotenv

logger = logging.getLogger(__name__)

# ==============================
# 路径与常量定义
# ==============================
BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA_DIR = os.path.join(BASE_DIR, "data")
LOG_DIR = os.path.join(DATA_DIR, "logs")
LOG_FILE = os.path.join(LOG_DIR, "twwc.log")
USER_CONFIG_FILE = os.path.join(BASE_DIR, "config.json")
FIXTURE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")

# 环境变量统一前缀
ENV_PREFIX = "TWWC_"


# ==============================
# 配置模型定义
# ==============================
class ConfigModel(BaseModel):
    S_GRID_SIZE: int = 99
    LAW_GRID_STEPS: int = 8
    GRID_RESOLUTION: int = 21
    TRIALS: int = 10000
    SAMPLES: int = 200
    SEED: int = 0
    THREADS: int = 1
    FACTOR_MODE: str = "exact"
    LOG_LEVEL: str = "INFO"
    LOG_FILE: Optional[str] = None
    OUTPUT_DIGITS: int = 12
    CHUNK_SIZE: int = 256

    @validator("S_GRID_SIZE", "LAW_GRID_STEPS", "TRIALS", "SAMPLES", "THREADS", "CHUNK_SIZE")
    def _positive(cls, v):
        if v < 1:
            raise ValueError("必须为正整数")
        return v

    @validator("GRID_RESOLUTION")
    def _resolution(cls, v):
        if v < 2:
            raise ValueError("功率网格分辨率至少为 2")
        return v

    @validator("FACTOR_MODE")
    def _factor_mode(cls, v):
        if v not in ("exact", "bound"):
            raise ValueError("FACTOR_MODE 只能是 exact 或 bound")
        return v


# ==============================
# 主配置类
# ==============================
class ConfigManager:
    """
    配置管理器：
    默认值 < 仓库根目录 config.json < .env / 进程环境变量（TWWC_ 前缀）
    """

    def __init__(self):
        self.config = ConfigModel()
        self.reload()

    def reload(self) -> ConfigModel:
        """重新加载配置"""
        load_dotenv(override=False)

        # Step 1: 从 config.json 加载（如果存在）
        file_conf: Dict[str, Any] = {}
        if os.path.exists(USER_CONFIG_FILE):
            try:
                with open(USER_CONFIG_FILE, "r", encoding="utf-8") as f:
                    file_conf = json.load(f)
                logger.debug("从 config.json 加载用户配置")
            except Exception as e:
                logger.warning(f"⚠️ 读取 config.json 失败: {e}")
                file_conf = {}

        # Step 2: 环境变量覆盖
        merged: Dict[str, Any] = {}
        for field in ConfigModel.__fields__:
            if field in file_conf:
                merged[field] = file_conf[field]
            env_value = os.getenv(ENV_PREFIX + field)
            if env_value is not None and env_value != "":
                merged[field] = env_value

        self.config = ConfigModel(**merged)
        logger.debug("✅ 配置加载完成", extra={"extra_data": {"threads": self.config.THREADS}})
        return self.config

    def override(self, **values: Any) -> ConfigModel:
        """命令行参数覆盖（值为 None 的项忽略）"""
        current = self.config.dict()
        current.update({k: v for k, v in values.items() if v is not None})
        self.config = ConfigModel(**current)
        return self.config

    @property
    def log_file(self) -> str:
        return self.config.LOG_FILE or LOG_FILE

    def get_config_for_report(self) -> Dict[str, Any]:
        """返回写入产物 meta 的配置快照（不含路径类字段）"""
        report = self.config.dict()
        report.pop("LOG_FILE", None)
        report.pop("THREADS", None)
        return report


# ==============================
# 全局实例
# ==============================
config_manager = ConfigManager()
