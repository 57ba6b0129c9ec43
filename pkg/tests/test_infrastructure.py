"""
配置、日志、产物存储、并行运行器与异常层次的测试。
"""
import json
import logging
import os
import threading

import numpy as np
import pytest

from twwclab.config import LOG_FILE, ConfigModel, config_manager
from twwclab.errors import (
    BudgetError,
    ConvergenceError,
    DomainError,
    SizingError,
    TwwcError,
    ValidationError,
    check_size,
)
from twwclab.logging_utils import JsonFormatter, setup_logging
from twwclab.runner import TaskRunner
from twwclab.storage import ArtifactStore, normalize_numbers, round_sig


class TestConfig:

    def test_defaults(self):
        cfg = ConfigModel()
        assert cfg.S_GRID_SIZE == 99
        assert cfg.FACTOR_MODE == "exact"
        assert cfg.THREADS == 1

    def test_env_overrides_file(self, monkeypatch):
        monkeypatch.setenv("TWWC_TRIALS", "50")
        monkeypatch.setenv("TWWC_FACTOR_MODE", "bound")
        cfg = config_manager.reload()
        assert cfg.TRIALS == 50
        assert cfg.FACTOR_MODE == "bound"

    def test_invalid_values(self, monkeypatch):
        with pytest.raises(ValueError):
            ConfigModel(FACTOR_MODE="loose")
        with pytest.raises(ValueError):
            ConfigModel(GRID_RESOLUTION=1)
        monkeypatch.setenv("TWWC_THREADS", "0")
        with pytest.raises(ValueError):
            config_manager.reload()

    def test_override_ignores_none(self):
        before = config_manager.config.SEED
        cfg = config_manager.override(SEED=None, TRIALS=7)
        assert cfg.SEED == before
        assert cfg.TRIALS == 7

    def test_report_snapshot(self):
        report = config_manager.get_config_for_report()
        assert "LOG_FILE" not in report
        assert "THREADS" not in report
        assert report["OUTPUT_DIGITS"] == config_manager.config.OUTPUT_DIGITS

    def test_log_file(self, tmp_path):
        assert config_manager.log_file == LOG_FILE
        config_manager.override(LOG_FILE=str(tmp_path / "x.log"))
        assert config_manager.log_file.endswith("x.log")


class TestErrors:

    def test_hierarchy(self):
        for cls in (DomainError, BudgetError):
            assert issubclass(cls, ValidationError)
            assert issubclass(cls, ValueError)
        assert not issubclass(SizingError, ValueError)
        assert issubclass(ConvergenceError, TwwcError)

    def test_check_size(self):
        check_size(10, 10, "ok")
        with pytest.raises(SizingError) as info:
            check_size(11, 10, "网格")
        assert info.value.requested == 11
        assert info.value.limit == 10

    def test_convergence_payload(self):
        err = ConvergenceError("未收敛", best_value=0.5, residual=1e-3)
        assert err.best_value == 0.5
        assert "residual=1.000e-03" in str(err)


class TestLogging:

    def test_json_formatter_merges_extra(self):
        record = logging.LogRecord("twwclab.test", logging.INFO, __file__, 1, "完成", None, None)
        record.extra_data = {"n": 4, "message": "不覆盖"}
        data = json.loads(JsonFormatter().format(record))
        assert data["message"] == "完成"
        assert data["n"] == 4
        assert data["level"] == "INFO"

    def test_setup_logging_writes_file(self, tmp_path):
        path = tmp_path / "logs" / "twwc.log"
        root = logging.getLogger()
        saved_handlers, saved_level = root.handlers[:], root.level
        try:
            setup_logging(str(path), "debug", console=False)
            logging.getLogger("twwclab.test").info("写入", extra={"extra_data": {"elapsed": 0.1}})
            for handler in root.handlers:
                handler.flush()
            line = json.loads(path.read_text(encoding="utf-8").splitlines()[-1])
            assert line["message"] == "写入"
            assert line["elapsed"] == 0.1
            assert root.level == logging.DEBUG
        finally:
            for handler in root.handlers[:]:
                root.removeHandler(handler)
                handler.close()
            for handler in saved_handlers:
                root.addHandler(handler)
            root.setLevel(saved_level)


class TestStorage:

    def test_round_sig(self):
        assert round_sig(1.23456789, 3) == 1.23
        assert round_sig(0.000123456, 2) == 0.00012
        assert round_sig(float("inf")) == float("inf")

    def test_normalize_numbers(self):
        data = normalize_numbers({"a": np.float64(1 / 3), "b": np.arange(2), "c": (True, np.bool_(False))}, 4)
        assert data == {"a": 0.3333, "b": [0, 1], "c": [True, False]}

    def test_json_is_stable(self, tmp_path):
        store = ArtifactStore()
        path = store.write_json(str(tmp_path / "sub" / "a.json"), {"b": 1.0, "a": [0.1, 0.2]})
        text = open(path, encoding="utf-8").read()
        assert text.index('"a"') < text.index('"b"')
        assert store.read_json(path) == {"a": [0.1, 0.2], "b": 1.0}
        assert not [f for f in os.listdir(tmp_path / "sub") if f.endswith(".tmp")]

    def test_csv_text(self):
        text = ArtifactStore.csv_text(["x", "ok"], [[0.5, 1], [0.25, 0]])
        assert text == "x,ok\n0.5,1\n0.25,0\n"

    def test_write_csv(self, tmp_path):
        path = ArtifactStore().write_csv(str(tmp_path / "rows.csv"), ["s", "err"], [[0.5, 1 / 3]])
        assert open(path, encoding="utf-8").read() == "s,err\n0.5,0.333333333333\n"

    def test_read_errors(self, tmp_path):
        store = ArtifactStore()
        with pytest.raises(ValidationError):
            store.read_json(str(tmp_path / "missing.json"))
        bad = tmp_path / "list.json"
        bad.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ValidationError):
            store.read_json(str(bad))

    def test_digest(self):
        assert ArtifactStore.digest("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


class TestRunner:

    @pytest.mark.parametrize("threads", [1, 4])
    def test_map_keeps_order(self, threads):
        runner = TaskRunner()
        assert runner.map(lambda x: x * x, range(20), threads=threads) == [x * x for x in range(20)]
        status = runner.get_status()
        assert status["status"] == TaskRunner.IDLE
        assert status["total_items"] == 20
        assert status["last_run_stats"]["items"] == 20

    def test_chunks_independent_of_threads(self):
        runner = TaskRunner()
        bounds = runner.map_chunks(lambda a, b: (a, b), 10, chunk_size=4)
        assert bounds == [(0, 4), (4, 8), (8, 10)]
        config_manager.override(THREADS=3)
        assert runner.map_chunks(lambda a, b: (a, b), 10, chunk_size=4) == bounds

    def test_uses_worker_threads(self):
        runner = TaskRunner()
        names = runner.map(lambda _: threading.current_thread().name, range(8), threads=2)
        assert all(name.startswith("twwc") for name in names)

    def test_failure_sets_error(self):
        runner = TaskRunner()

        def boom(x):
            raise RuntimeError("坏")

        with pytest.raises(RuntimeError):
            runner.map(boom, [1, 2], threads=2)
        status = runner.get_status()
        assert status["status"] == TaskRunner.ERROR
        assert status["total_failed"] == 1
        assert status["active_batches"] == 0
