import threading
import time
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar

from twwclab.config import config_manager

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class TaskRunner:
    """
    并行任务运行器：网格扫描、试验块、码本实现等独立工作项的线程池映射。
    结果总是按输入顺序返回，分块大小与线程数无关。
    """

    # 状态机
    IDLE = "IDLE"
    RUNNING = "RUNNING"
    ERROR = "ERROR"

    def __init__(self):
        self._lock = threading.Lock()
        self._status = self.IDLE
        self._active = 0
        self._last_run_stats: Dict[str, Any] = {}
        self._total_items: int = 0
        self._total_failed: int = 0

    def get_status(self) -> Dict[str, Any]:
        """
        返回当前运行状态和指标。
        """
        with self._lock:
            return {
                "status": self._status,
                "active_batches": self._active,
                "last_run_stats": dict(self._last_run_stats),
                "total_items": self._total_items,
                "total_failed": self._total_failed,
                "threads": config_manager.config.THREADS,
            }

    def _begin(self) -> None:
        with self._lock:
            self._active += 1
            self._status = self.RUNNING

    def _finish(self, label: str, items: int, elapsed: float, failed: bool) -> None:
        with self._lock:
            self._active -= 1
            self._total_items += items
            self._last_run_stats = {"label": label, "items": items, "elapsed": round(elapsed, 6)}
            if failed:
                self._total_failed += 1
                self._status = self.ERROR
            elif self._active == 0:
                self._status = self.IDLE

    def map(self, fn: Callable[[T], R], items: Sequence[T], label: str = "map",
            threads: Optional[int] = None) -> List[R]:
        """
        对 items 逐项调用 fn，按输入顺序返回结果。

        :param threads: 线程数，默认取配置 THREADS；为 1 时在当前线程顺序执行。
        """
        items = list(items)
        workers = threads or config_manager.config.THREADS
        self._begin()
        start_time = time.time()
        failed = False
        try:
            if workers <= 1 or len(items) <= 1:
                return [fn(item) for item in items]
            with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="twwc") as pool:
                return list(pool.map(fn, items))
        except Exception as e:
            failed = True
            logger.error(f"❌ 并行任务 {label} 失败: {e}")
            raise
        finally:
            elapsed = time.time() - start_time
            self._finish(label, len(items), elapsed, failed)
            logger.debug(f"并行任务 {label} 结束", extra={"extra_data": {
                "items": len(items), "threads": workers, "elapsed": round(elapsed, 4)}})

    def map_chunks(self, fn: Callable[[int, int], R], total: int, chunk_size: Optional[int] = None,
                   label: str = "chunks") -> List[R]:
        """
        把 [0, total) 切成固定大小的块，对每块调用 fn(start, stop)。
        块边界只由 chunk_size 决定，归约结果与线程数无关。
        """
        size = chunk_size or config_manager.config.CHUNK_SIZE
        bounds = [(start, min(start + size, total)) for start in range(0, total, size)]
        return self.map(lambda b: fn(*b), bounds, label=label)


# 全局运行器实例
runner = TaskRunner()
