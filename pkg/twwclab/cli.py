"""
命令行入口：读取实验规格，分派到区域 / 指数界 / 仿真 / 验证 / 消元，
以 JSON 或 CSV 原子写出产物。

退出码：0 成功（含带标记的结果），2 输入错误，3 规模守卫，1 其他失败。
"""
import argparse
import logging
import math
import sys
import time
from dataclasses import dataclass
from typing import Any, Dict, List, NamedTuple, Optional, Sequence

from twwclab import __version__
from twwclab.channel import AdditiveChannelSpec, GaussianChannelSpec
from twwclab.config import config_manager
from twwclab.errors import SizingError, ValidationError
from twwclab.exponents import (
    bounds_additive,
    bounds_constant_composition,
    bounds_iid,
    default_s_grid,
)
from twwclab.logging_utils import setup_logging
from twwclab.parser import (
    ExperimentSpec,
    channel_tensor,
    parse_channel,
    parse_cost,
    parse_law,
    parse_plan,
    parse_rates,
    parse_s_grid,
    parse_spec,
    parse_system,
    parse_types,
)
from twwclab.polytope import RateRegion2D, fourier_motzkin
from twwclab.regions import (
    law_grid,
    region_additive,
    region_gaussian_inner,
    region_gaussian_inner_hull,
    region_gaussian_outer,
    region_single,
    region_union,
    time_shared_union,
)
from twwclab.simulator import (
    CodebookParams,
    exact_leakage,
    generate_codebook,
    run_error_trials,
    sizes_from_rates,
    verify_gallager,
    verify_resolvability,
)
from twwclab.storage import artifact_store

logger = logging.getLogger(__name__)

COMMANDS = ("region", "exponent", "simulate", "verify-resolvability", "verify-gallager", "fm")
FORMATS = ("json", "csv")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT = 2
EXIT_SIZING = 3

NATS_PER_BIT = math.log(2.0)


@dataclass
class RunConfig:
    command: str
    input: str
    output: Optional[str]
    format: str
    seed: Optional[int]
    s_grid: Optional[str]
    grid: Optional[int]
    trials: Optional[int]
    factor_mode: Optional[str]
    flavor: Optional[str]
    cost: Optional[str]
    bits: bool
    eliminate: Optional[List[str]]
    log_level: Optional[str]

    @property
    def unit(self) -> str:
        return "bits" if self.bits else "nats"

    def display(self, value: float) -> float:
        """仅在输出时换算单位，内部一律使用 nats。"""
        return value / NATS_PER_BIT if self.bits else value


class Artifact(NamedTuple):
    payload: Dict[str, Any]
    header: List[str]
    rows: List[List[Any]]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twwc", description="双向窃听信道计算实验室")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--in", dest="input", required=True, help="实验规格或线性系统 JSON 文件")
    parser.add_argument("--out", dest="output", default=None, help="产物路径，缺省时写到 stdout")
    parser.add_argument("--format", choices=FORMATS, default="json")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--s-grid", dest="s_grid", default=None, help="网格点数或逗号分隔的 s 值")
    parser.add_argument("--grid", type=int, default=None, help="输入律格点步数 / 功率网格分辨率")
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--factor-mode", dest="factor_mode", choices=("exact", "bound"), default=None)
    parser.add_argument("--flavor", choices=("joint", "individual", "outer"), default=None)
    parser.add_argument("--cost", default=None, help="成本约束 JSON 文件")
    parser.add_argument("--bits", action="store_true", help="输出以 bits 显示")
    parser.add_argument("--eliminate", default=None, help="逗号分隔的消元顺序，覆盖文件中的 eliminate")
    parser.add_argument("--log-level", dest="log_level", default=None)
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    eliminate = None
    if ns.eliminate is not None:
        eliminate = [v.strip() for v in ns.eliminate.split(",") if v.strip()]
    return RunConfig(
        command=ns.command, input=ns.input, output=ns.output, format=ns.format, seed=ns.seed,
        s_grid=ns.s_grid, grid=ns.grid, trials=ns.trials, factor_mode=ns.factor_mode, flavor=ns.flavor,
        cost=ns.cost, bits=ns.bits, eliminate=eliminate, log_level=ns.log_level,
    )


# ==============================
# 公共辅助
# ==============================
def _s_grid(run: RunConfig, open_right: bool = False) -> Optional[List[float]]:
    value = parse_s_grid(run.s_grid)
    if value is None:
        return None
    if isinstance(value, int):
        return list(default_s_grid(value, open_right=open_right))
    return value


def _require(value: Any, name: str) -> Any:
    if value is None:
        raise ValidationError(f"该命令需要字段 {name}")
    return value


def _region_artifact(region: RateRegion2D, run: RunConfig) -> Artifact:
    payload = region.to_dict()
    payload["vertices"] = [[run.display(x) for x in v] for v in payload["vertices"]]
    payload["halfspaces"] = [[a, b, run.display(c)] for a, b, c in payload["halfspaces"]]
    header = [f"R1_{run.unit}", f"R2_{run.unit}"]
    return Artifact(payload, header, payload["vertices"])


# ==============================
# 命令
# ==============================
def cmd_region(spec: ExperimentSpec, run: RunConfig) -> Artifact:
    flavor = run.flavor or spec.flavor
    channel = parse_channel(spec.channel)
    cost = parse_cost(artifact_store.read_json(run.cost)) if run.cost else parse_cost(spec.cost)

    if isinstance(channel, GaussianChannelSpec):
        if flavor == "outer":
            c1, c2 = _require(spec.budgets, "budgets")
            return _region_artifact(region_gaussian_outer(channel, c1, c2), run)
        if spec.powers is not None:
            return _region_artifact(region_gaussian_inner(channel, *spec.powers, flavor=flavor), run)
        c1, c2 = _require(spec.budgets, "budgets")
        region = region_gaussian_inner_hull(channel, c1, c2, resolution=run.grid, flavor=flavor)
        return _region_artifact(region, run)

    if isinstance(channel, AdditiveChannelSpec) and spec.law is None and spec.law_grid is None and run.grid is None:
        return _region_artifact(region_additive(channel, flavor), run)

    if flavor == "outer":
        raise ValidationError("outer 区域只对加性信道（均匀输入）与高斯信道定义")
    t = channel_tensor(channel)
    steps = run.grid or spec.law_grid
    if steps is None:
        return _region_artifact(region_single(t, parse_law(spec.law, t), flavor), run)

    law = parse_law(spec.law, t) if spec.law is not None else None
    v_sizes = (law.sizes[0], law.sizes[2]) if law is not None else None
    laws = law_grid(t.sizes[0], t.sizes[1], steps, v_sizes=v_sizes)
    plan = parse_plan(spec.plan)
    if plan is not None:
        region = time_shared_union(t, laws, plan, _require(cost, "cost"), flavor)
    else:
        region = region_union(t, laws, cost, flavor)
    return _region_artifact(region, run)


def cmd_exponent(spec: ExperimentSpec, run: RunConfig) -> Artifact:
    rates = parse_rates(spec.rates)
    n = _require(spec.n, "n")
    channel = parse_channel(spec.channel)
    if spec.mode == "constant_composition":
        jt1, jt2 = parse_types(spec.types)
        report = bounds_constant_composition(channel_tensor(channel), jt1, jt2, rates, n,
                                             s_grid=_s_grid(run, open_right=True),
                                             factor_mode=run.factor_mode, ensemble=spec.ensemble)
    elif isinstance(channel, AdditiveChannelSpec) and spec.law is None:
        report = bounds_additive(channel, rates, n, s_grid=_s_grid(run), ensemble=spec.ensemble)
    else:
        t = channel_tensor(channel)
        report = bounds_iid(t, parse_law(spec.law, t), rates, n, s_grid=_s_grid(run), ensemble=spec.ensemble)
    return Artifact(report.to_dict(), list(report.csv_header), report.csv_rows())


def _codebook_params(spec: ExperimentSpec, t) -> CodebookParams:
    n = _require(spec.n, "n")
    if spec.M is None and spec.rates is not None:
        M, L = sizes_from_rates(parse_rates(spec.rates), n)
    else:
        M, L = _require(spec.M, "M"), spec.L or (1, 1)
    if spec.mode == "constant_composition":
        return CodebookParams(n=n, M=M, L=L, types=parse_types(spec.types))
    return CodebookParams(n=n, M=M, L=L, law=parse_law(spec.law, t))


def cmd_simulate(spec: ExperimentSpec, run: RunConfig) -> Artifact:
    t = channel_tensor(parse_channel(spec.channel))
    params = _codebook_params(spec, t)
    seed = run.seed if run.seed is not None else spec.seed
    cb = generate_codebook(params, seed)
    result = run_error_trials(t, cb, run.trials or spec.trials, seed)
    if spec.leakage:
        leak = exact_leakage(t, cb)
        result.leakage = type(leak)(*(run.display(v) for v in leak))
    result.meta["units"] = run.unit
    return Artifact(result.to_dict(), list(result.csv_header), result.csv_rows())


def _law_or_types(spec: ExperimentSpec, t):
    if spec.mode == "constant_composition":
        return {"types": parse_types(spec.types)}
    return {"law": parse_law(spec.law, t)}


def _verify_artifact(report, run: RunConfig, convert: bool) -> Artifact:
    if convert and run.bits:
        for row in report.rows:
            for key in ("lhs", "rhs", "slack", "rhs_tight"):
                if key in row:
                    row[key] = run.display(row[key])
        report.lhs = run.display(report.lhs)
        if report.interval is not None:
            report.interval = tuple(run.display(v) for v in report.interval)
    report.meta["units"] = run.unit if convert else "probability"
    return Artifact(report.to_dict(), report.csv_header, report.csv_rows())


def cmd_verify_resolvability(spec: ExperimentSpec, run: RunConfig) -> Artifact:
    t = channel_tensor(parse_channel(spec.channel))
    L1, L2 = _require(spec.L, "L")
    report = verify_resolvability(
        t, L1, L2, _require(spec.n, "n"), s_grid=_s_grid(run, open_right=spec.mode == "constant_composition"),
        sampled=spec.sampled, samples=spec.samples, seed=run.seed if run.seed is not None else spec.seed,
        factor_mode=run.factor_mode, **_law_or_types(spec, t),
    )
    return _verify_artifact(report, run, convert=True)


def cmd_verify_gallager(spec: ExperimentSpec, run: RunConfig) -> Artifact:
    t = channel_tensor(parse_channel(spec.channel))
    report = verify_gallager(
        t, _require(spec.N, "N"), _require(spec.n, "n"), s_grid=_s_grid(run),
        sampled=spec.sampled, samples=spec.samples, seed=run.seed if run.seed is not None else spec.seed,
        factor_mode=run.factor_mode, user=spec.user, **_law_or_types(spec, t),
    )
    return _verify_artifact(report, run, convert=False)


def cmd_fm(data: Dict[str, Any], run: RunConfig) -> Artifact:
    system, order = parse_system(data, run.eliminate)
    projected = fourier_motzkin(system, order)
    payload = projected.to_dict()
    payload["eliminate"] = order
    payload["meta"] = {"input_rows": len(system.inequalities), "output_rows": len(projected.inequalities)}
    return Artifact(payload, ["inequality"], [[line] for line in projected.render()])


HANDLERS = {
    "region": cmd_region,
    "exponent": cmd_exponent,
    "simulate": cmd_simulate,
    "verify-resolvability": cmd_verify_resolvability,
    "verify-gallager": cmd_verify_gallager,
}


# ==============================
# 执行
# ==============================
def execute(run: RunConfig) -> Artifact:
    text = artifact_store.read_text(run.input)
    data = artifact_store.read_json(run.input)
    if run.command == "fm":
        artifact = cmd_fm(data, run)
    else:
        artifact = HANDLERS[run.command](parse_spec(data), run)
    meta = artifact.payload.setdefault("meta", {})
    meta["command"] = run.command
    meta["input_sha256"] = artifact_store.digest(text)
    meta["config"] = config_manager.get_config_for_report()
    return artifact


def _emit(artifact: Artifact, run: RunConfig) -> None:
    if run.format == "csv":
        text = artifact_store.csv_text(artifact.header, artifact.rows)
    else:
        text = artifact_store.dumps(artifact.payload)
    if run.output:
        artifact_store.write_text(run.output, text)
    else:
        sys.stdout.write(text)


def run_once(argv: Optional[Sequence[str]] = None) -> int:
    """
    执行一条命令并返回退出码；库函数抛出的异常在这里统一归类。
    """
    try:
        run = parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_INPUT

    start_time = time.time()
    logger.info(f"🚀 开始执行 {run.command}", extra={"extra_data": {"input": run.input}})
    try:
        config_manager.override(SEED=run.seed, LOG_LEVEL=run.log_level)
        artifact = execute(run)
        _emit(artifact, run)
    except SizingError as e:
        logger.error(f"❌ 超出规模限制: {e}", extra={"extra_data": {"requested": e.requested, "limit": e.limit}})
        sys.stderr.write(f"sizing error: {e}\n")
        return EXIT_SIZING
    except ValueError as e:
        logger.error(f"❌ 输入错误: {e}")
        sys.stderr.write(f"input error: {e}\n")
        return EXIT_INPUT
    except Exception as e:
        logger.error(f"❌ 执行 {run.command} 时发生未捕获的异常: {e}", exc_info=True)
        sys.stderr.write(f"error: {e}\n")
        return EXIT_FAILURE
    finally:
        config_manager.reload()

    logger.info(f"✅ {run.command} 执行完毕", extra={"extra_data": {"elapsed": round(time.time() - start_time, 4)}})
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> None:
    level = config_manager.config.LOG_LEVEL
    if argv is None:
        argv = sys.argv[1:]
    if "--log-level" in argv:
        idx = list(argv).index("--log-level")
        if idx + 1 < len(argv):
            level = argv[idx + 1]
    setup_logging(config_manager.log_file, level)
    sys.exit(run_once(argv))
