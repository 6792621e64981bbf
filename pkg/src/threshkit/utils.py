from typing import Any, Iterable

import yaml


def deep_merge_dicts(source: dict, destination: dict) -> dict:
    """
    深度合并两个字典。'source' 中的值会覆盖 'destination' 中的值。
    """
    for key, value in source.items():
        if isinstance(value, dict) and key in destination and isinstance(destination[key], dict):
            destination[key] = deep_merge_dicts(value, destination[key])
        else:
            destination[key] = value
    return destination


def set_nested_key(d: dict, key_path: str, value: Any):
    """
    通过点分隔的路径 (e.g., 'solver.max_iter') 在嵌套字典中设置值。
    路径中途遇到非字典值时抛出 KeyError。
    """
    keys = key_path.split('.')
    current_level = d
    for key in keys[:-1]:
        current_level = current_level.setdefault(key, {})
        if not isinstance(current_level, dict):
            raise KeyError(f"在设置 '{key_path}' 时，路径中的 '{key}' 不是一个字典。")
    current_level[keys[-1]] = value


def get_nested_key(d: dict, key_path: str, default: Any = None) -> Any:
    current_level: Any = d
    for key in key_path.split('.'):
        if not isinstance(current_level, dict) or key not in current_level:
            return default
        current_level = current_level[key]
    return current_level


def parse_set_vars(set_vars: Iterable[str]) -> dict:
    """
    把 '--set KEY=VALUE' 列表解析为嵌套字典。VALUE 按 YAML 标量解析，
    因此 `solver.max_iter=10` 得到整数 10，`problem.noise_sigma=1e-5` 得到浮点数。
    """
    overrides: dict = {}
    for var in set_vars:
        if '=' not in var:
            raise ValueError(f"'--set' 参数格式应为 KEY=VALUE，得到: '{var}'")
        key, raw = var.split('=', 1)
        value = yaml.safe_load(raw) if raw else ""
        # YAML 1.1 不把 '1e-5' 识别为浮点数
        if isinstance(value, str):
            try:
                value = float(value)
            except ValueError:
                pass
        set_nested_key(overrides, key.strip(), value)
    return overrides
