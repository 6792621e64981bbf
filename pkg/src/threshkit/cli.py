import json
import time
from pathlib import Path
from typing import Any, Dict, List, NoReturn, Optional, Tuple

import numpy as np
import typer

from .config import ConfigError, build_experiment_spec, build_solver_config, load_config
from .console import rich_debug, rich_echo, state
from .experiments import ExperimentError, ExperimentSpec, SuccessCurve, make_instance, relative_error, run_sweep
from .linalg import LinalgError, load_matrix, load_vector
from .report import (
    MANIFEST_FILENAME,
    ReportError,
    build_manifest,
    render_summary,
    summarize_phase_transition,
    write_manifest,
    write_sweep_outputs,
)
from .solvers import SolverConfigError, ThresholdingRule, solve

EXIT_MALFORMED = 1
EXIT_MAX_ITER = 2

app = typer.Typer(
    help="迭代阈值稀疏恢复求解器与成功率相变基准工具 (1/2-ε, 2/3-ε, Half, 2/3, Soft, Hard)。",
    add_completion=False,
    rich_markup_mode="markdown",
)

CONFIG_OPTION = typer.Option(None, "-c", "--config", help="YAML 配置文件路径。缺省时使用内置默认参数。")
QUICK_OPTION = typer.Option(False, "--quick", help="缩小规模 (m=64, n=256, trials=5)，用于 CI。")
SEED_OPTION = typer.Option(None, "--seed", help="覆盖 experiment.base_seed (64 位无符号整数)。")
SET_OPTION = typer.Option(
    None, "--set", help="以 'SECTION.KEY=VALUE' 格式覆盖配置项，拥有最高优先级 (可多次使用)。"
)
OUT_OPTION = typer.Option(None, "-o", "--out", help="结果输出目录，覆盖 output.dir。")
WORKERS_OPTION = typer.Option(1, "-w", "--workers", min=1, help="并行进程数。结果与串行执行逐字节相同。")
QUIET_OPTION = typer.Option(False, "-q", "--quiet", help="安静模式，只输出结果或错误信息。")
DEBUG_OPTION = typer.Option(False, "--debug", help="启用详细的调试日志，输出到 stderr。")


def _fail(message: str, code: int = EXIT_MALFORMED) -> NoReturn:
    typer.secho(f"[错误] {message}", err=True, fg=typer.colors.RED)
    raise typer.Exit(code)


def _load_context(
    config_path: Optional[Path], quick: bool, seed: Optional[int], set_vars: Optional[List[str]]
) -> Dict[str, Any]:
    rich_echo("--- 1. 加载配置 ---", bold=True)
    if seed is not None and not 0 <= seed < 2 ** 64:
        _fail(f"--seed 必须是 64 位无符号整数: {seed}")
    try:
        return load_config(config_path, quick=quick, seed=seed, set_vars=set_vars or [])
    except ConfigError as e:
        _fail(str(e))


def _load_problem(
    context: Dict[str, Any],
    matrix_path: Optional[Path],
    rhs_path: Optional[Path],
    truth_path: Optional[Path],
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    if matrix_path is None:
        problem = context["problem"]
        seed = int(context["experiment"]["base_seed"])
        instance = make_instance(
            int(problem["m"]), int(problem["n"]), int(problem["k"]), float(problem["noise_sigma"]), seed
        )
        rich_echo(f"  生成实例: m={problem['m']}, n={problem['n']}, k={problem['k']}, seed={seed}")
        return instance.A, instance.b, instance.z_true

    if rhs_path is None:
        raise ConfigError("使用 --matrix 时必须同时提供 --rhs")
    A = load_matrix(matrix_path)
    b = load_vector(rhs_path, length=A.shape[0])
    truth = load_vector(truth_path, length=A.shape[1]) if truth_path else None
    rich_echo(f"  读取实例: A 为 {A.shape[0]}×{A.shape[1]} ({matrix_path})")
    return A, b, truth


@app.command("solve")
def cmd_solve(
    config_path: Optional[Path] = CONFIG_OPTION,
    matrix_path: Optional[Path] = typer.Option(None, "--matrix", help="测量矩阵 A 的 CSV 文件 (每行一行)。"),
    rhs_path: Optional[Path] = typer.Option(None, "--rhs", help="观测向量 b 的 CSV 文件 (每行一个分量)。"),
    truth_path: Optional[Path] = typer.Option(None, "--truth", help="真实信号 z₀ 的 CSV 文件，用于计算 RE。"),
    quick: bool = QUICK_OPTION,
    seed: Optional[int] = SEED_OPTION,
    set_vars: Optional[List[str]] = SET_OPTION,
    quiet: bool = QUIET_OPTION,
    debug: bool = DEBUG_OPTION,
):
    """
    求解单个实例 (从文件读取或按种子生成)，把结果以 JSON 写到 stdout。

    退出码: 0 收敛，2 达到 max_iter，1 输入错误。
    """
    state.quiet = quiet
    state.debug = debug
    context = _load_context(config_path, quick, seed, set_vars)

    try:
        A, b, truth = _load_problem(context, matrix_path, rhs_path, truth_path)
        config = build_solver_config(context, A.shape[1])
    except (ConfigError, ExperimentError, LinalgError) as e:
        _fail(str(e))
    except (OSError, ValueError) as e:
        _fail(f"无法读取输入: {e}")

    p_text = "" if config.penalty_p is None else f", p={config.penalty_p:g}"
    rich_echo(f"--- 2. 求解 ({config.rule.label}{p_text}, r={config.sparsity_r}) ---", bold=True)
    try:
        result = solve(A, b, config)
    except (LinalgError, SolverConfigError) as e:
        _fail(str(e))

    re = None
    if truth is not None and np.any(truth):
        re = relative_error(result.z_star, truth)

    payload = {
        "algorithm": config.rule.value,
        "p": config.penalty_p,
        "converged": result.converged,
        "termination_reason": result.termination_reason.value,
        "iterations": result.iterations,
        "relative_error": re,
        "lambda": result.lambda_final,
        "z_star": result.z_star.tolist(),
    }
    typer.echo(json.dumps(payload))

    if not result.converged:
        rich_echo(f"  [警告] {result.iterations} 次迭代后未收敛", fg=typer.colors.YELLOW)
        raise typer.Exit(EXIT_MAX_ITER)
    rich_echo(f"  => 收敛: {result.iterations} 次迭代", fg=typer.colors.GREEN)


def _run_sweep_command(
    config_path: Optional[Path],
    out_dir: Optional[Path],
    workers: int,
    quick: bool,
    seed: Optional[int],
    set_vars: Optional[List[str]],
    require_all_rules: bool = False,
) -> Tuple[ExperimentSpec, List[SuccessCurve]]:
    context = _load_context(config_path, quick, seed, set_vars)
    try:
        spec = build_experiment_spec(context)
    except ConfigError as e:
        _fail(str(e))

    if require_all_rules:
        missing = set(ThresholdingRule) - {entry.rule for entry in spec.algorithms}
        if missing:
            names = ", ".join(sorted(rule.value for rule in missing))
            _fail(f"compare 需要全部六种算法，缺少: {names}")

    target = out_dir if out_dir is not None else Path(str(context["output"]["dir"]))
    rich_echo(
        f"--- 2. 运行实验: m={spec.m}, n={spec.n}, k={spec.sparsity_range.start}..{spec.sparsity_range.stop}, "
        f"trials={spec.trials}, {len(spec.algorithms)} 个算法 ---",
        bold=True,
    )
    started = time.perf_counter()
    try:
        curves = run_sweep(spec, workers=workers)
    except (ExperimentError, LinalgError, SolverConfigError) as e:
        _fail(str(e))
    runtime = time.perf_counter() - started

    rich_echo("--- 3. 写出结果 ---", bold=True)
    try:
        curve_paths, combined, plot_paths = write_sweep_outputs(curves, target)
        manifest = write_manifest(build_manifest(context, curves, runtime), target / MANIFEST_FILENAME)
    except ReportError as e:
        _fail(str(e))

    for path in curve_paths + [combined] + plot_paths + [manifest]:
        rich_debug(f"写出: {path}")
    rich_echo(f"  => {len(curves)} 条曲线已写入 {target} (用时 {runtime:.1f}s)", fg=typer.colors.GREEN)
    return spec, curves


@app.command("sweep")
def cmd_sweep(
    config_path: Optional[Path] = CONFIG_OPTION,
    out_dir: Optional[Path] = OUT_OPTION,
    workers: int = WORKERS_OPTION,
    quick: bool = QUICK_OPTION,
    seed: Optional[int] = SEED_OPTION,
    set_vars: Optional[List[str]] = SET_OPTION,
    quiet: bool = QUIET_OPTION,
    debug: bool = DEBUG_OPTION,
):
    """
    按稀疏度扫描成功率，输出每个算法的 CSV、合并的长格式 CSV、TSV 绘图数据和 manifest。
    """
    state.quiet = quiet
    state.debug = debug
    _run_sweep_command(config_path, out_dir, workers, quick, seed, set_vars)
    rich_echo("\n--- ✨ 处理完毕 ---", bold=True, fg=typer.colors.BRIGHT_GREEN)


@app.command("compare")
def cmd_compare(
    config_path: Optional[Path] = CONFIG_OPTION,
    out_dir: Optional[Path] = OUT_OPTION,
    workers: int = WORKERS_OPTION,
    quick: bool = QUICK_OPTION,
    seed: Optional[int] = SEED_OPTION,
    set_vars: Optional[List[str]] = SET_OPTION,
    quiet: bool = QUIET_OPTION,
    debug: bool = DEBUG_OPTION,
):
    """
    与 sweep 相同，并在 stdout 输出各算法 success_rate ≥ 0.9 的最大稀疏度排名。
    """
    state.quiet = quiet
    state.debug = debug
    _, curves = _run_sweep_command(config_path, out_dir, workers, quick, seed, set_vars, require_all_rules=True)
    typer.echo(render_summary(summarize_phase_transition(curves)), nl=False)
    rich_echo("\n--- ✨ 处理完毕 ---", bold=True, fg=typer.colors.BRIGHT_GREEN)


if __name__ == "__main__":
    app()
