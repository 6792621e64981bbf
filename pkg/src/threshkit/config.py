import copy
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from jinja2 import Environment, StrictUndefined, TemplateError

from .console import rich_debug, rich_echo
from .experiments import AlgorithmEntry, ExperimentError, ExperimentSpec, SparsityRange
from .solvers import SolverConfig, SolverConfigError, ThresholdingRule
from .utils import deep_merge_dicts, get_nested_key, parse_set_vars

QUICK_M = 64
QUICK_N = 256
QUICK_TRIALS = 5

# 默认值即参考实验设置: m=128, n=512, 每个稀疏度 20 次试验
DEFAULTS: Dict[str, Any] = {
    "problem": {
        "m": 128,
        "n": 512,
        "k": 10,
        "sparsity": {"start": 1, "stop": 40, "step": 1},
        "noise_sigma": 0.0,
    },
    "experiment": {
        "trials": 20,
        "base_seed": 0,
        "success_threshold": 1e-4,
    },
    "solver": {
        "eta": 0.01,
        "gamma": 0.7,
        "epsilon_floor": 1e-3,
        "tol": 1e-8,
        "max_iter": 5000,
    },
    "algorithm": {"rule": "half_eps", "p": 0.1},
    "algorithms": [
        {"rule": "half_eps", "p": 0.1},
        {"rule": "two_thirds_eps", "p": 0.0},
        {"rule": "half"},
        {"rule": "two_thirds"},
        {"rule": "soft"},
        {"rule": "hard"},
    ],
    "output": {"dir": "$results/m{{ problem.m }}_n{{ problem.n }}"},
}


class ConfigError(Exception):
    pass


def _read_yaml(path: Path) -> Dict[str, Any]:
    if not path.is_file():
        raise ConfigError(f"配置文件不存在: {path}")
    try:
        content = yaml.safe_load(path.read_text("utf-8"))
    except yaml.YAMLError as e:
        raise ConfigError(f"无法解析配置文件 '{path}': {e}") from e
    if content is None:
        return {}
    if not isinstance(content, dict):
        raise ConfigError(f"配置文件 '{path}' 顶层必须是映射 (mapping)")
    return content


def apply_quick(context: Dict[str, Any]) -> Dict[str, Any]:
    """
    把问题规模缩小到 m=64, n=256, trials=5，稀疏度范围按 m 的比例缩放。
    """
    problem = context["problem"]
    factor = QUICK_M / float(problem["m"])
    sparsity = problem.get("sparsity") or {}
    if sparsity:
        start = max(1, int(round(sparsity["start"] * factor)))
        stop = max(start, int(round(sparsity["stop"] * factor)))
        problem["sparsity"] = {**sparsity, "start": start, "stop": stop}
    if "k" in problem:
        problem["k"] = max(1, int(round(problem["k"] * factor)))
    problem["m"] = QUICK_M
    problem["n"] = QUICK_N
    context["experiment"]["trials"] = QUICK_TRIALS
    return context


def render_dynamic_values(context: Dict[str, Any]) -> Dict[str, Any]:
    """
    以 '$' 开头的字符串按 Jinja2 模板渲染，上下文为整个配置。
    只渲染一轮：动态值不能引用另一个动态值。
    """
    env = Environment(autoescape=False, undefined=StrictUndefined)

    def walk(node: Any, key_path: str) -> Any:
        if isinstance(node, dict):
            return {k: walk(v, f"{key_path}.{k}" if key_path else k) for k, v in node.items()}
        if isinstance(node, list):
            return [walk(v, f"{key_path}[{i}]") for i, v in enumerate(node)]
        if isinstance(node, str) and node.startswith("$"):
            try:
                rendered = env.from_string(node[1:]).render(context)
            except TemplateError as e:
                raise ConfigError(f"渲染配置项 '{key_path}' 失败: {e}") from e
            rich_debug(f"[Config] {key_path} = {rendered}")
            return rendered
        return node

    return walk(context, "")


def load_config(
    config_path: Optional[Path],
    quick: bool = False,
    seed: Optional[int] = None,
    set_vars: Optional[List[str]] = None,
) -> Dict[str, Any]:
    """
    按瀑布流加载配置 (从低到高): 内置默认值 → 配置文件 → --quick → --seed → --set。
    返回完全解析后的配置字典，它同时也是 manifest 中的 spec 回显。
    """
    context = copy.deepcopy(DEFAULTS)

    if config_path is not None:
        rich_echo(f"  加载配置: {config_path}")
        context = deep_merge_dicts(_read_yaml(config_path), context)

    if quick:
        rich_echo("  --quick: 缩放至 m=64, n=256, trials=5")
        context = apply_quick(context)

    if seed is not None:
        context["experiment"]["base_seed"] = seed

    if set_vars:
        try:
            overrides = parse_set_vars(set_vars)
        except (KeyError, ValueError) as e:
            raise ConfigError(str(e)) from e
        context = deep_merge_dicts(overrides, context)

    return render_dynamic_values(context)


def _solver_template(
    context: Dict[str, Any], rule: ThresholdingRule, sparsity_r: int, p: Optional[float]
) -> SolverConfig:
    solver = context.get("solver") or {}
    # Hard / Soft 没有 p，沿用 SolverConfig 的缺省值
    penalty = {} if p is None else {"p": float(p)}
    return SolverConfig(
        rule=rule,
        sparsity_r=int(sparsity_r),
        eta=float(solver["eta"]),
        gamma=float(solver["gamma"]),
        epsilon_floor=float(solver["epsilon_floor"]),
        tol=float(solver["tol"]),
        max_iter=int(solver["max_iter"]),
        **penalty,
    )


def parse_algorithm(item: Any) -> AlgorithmEntry:
    if isinstance(item, str):
        item = {"rule": item}
    if not isinstance(item, dict) or "rule" not in item:
        raise ConfigError(f"无效的算法条目: {item!r}")
    rule = ThresholdingRule.parse(item["rule"])
    if not rule.uses_epsilon:
        return AlgorithmEntry(rule=rule)
    if "p" not in item:
        raise ConfigError(f"算法 '{rule.value}' 需要参数 p")
    return AlgorithmEntry(rule=rule, p=float(item["p"]))


def build_experiment_spec(context: Dict[str, Any]) -> ExperimentSpec:
    try:
        problem = context["problem"]
        experiment = context["experiment"]
        sparsity = problem["sparsity"]
        algorithms = tuple(parse_algorithm(item) for item in (context.get("algorithms") or []))
        return ExperimentSpec(
            m=int(problem["m"]),
            n=int(problem["n"]),
            sparsity_range=SparsityRange(
                start=int(sparsity["start"]),
                stop=int(sparsity["stop"]),
                step=int(sparsity.get("step", 1)),
            ),
            algorithms=algorithms,
            trials=int(experiment["trials"]),
            noise_sigma=float(problem.get("noise_sigma", 0.0)),
            base_seed=int(experiment["base_seed"]),
            success_threshold=float(experiment["success_threshold"]),
            solver=_solver_template(context, ThresholdingRule.HALF_EPS, 1, 0.5),
        )
    except (KeyError, TypeError) as e:
        raise ConfigError(f"配置缺少或包含无效字段: {e}") from e
    except (ExperimentError, SolverConfigError, ValueError) as e:
        raise ConfigError(str(e)) from e


def build_solver_config(context: Dict[str, Any], n: int) -> SolverConfig:
    """单实例求解用的 SolverConfig；sparsity_r 缺省取 problem.k。"""
    try:
        entry = parse_algorithm(context.get("algorithm"))
        sparsity_r = get_nested_key(context, "solver.sparsity_r") or context["problem"]["k"]
        config = _solver_template(context, entry.rule, sparsity_r, entry.p)
    except (KeyError, TypeError) as e:
        raise ConfigError(f"配置缺少或包含无效字段: {e}") from e
    except (SolverConfigError, ValueError) as e:
        raise ConfigError(str(e)) from e
    if config.sparsity_r >= n:
        raise ConfigError(f"sparsity_r = {config.sparsity_r} 必须小于 n = {n}")
    return config
