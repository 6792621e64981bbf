import pytest
import yaml
from pathlib import Path

from threshkit.console import state
from threshkit.experiments import make_instance


@pytest.fixture(autouse=True)
def reset_console_state():
    """CLI 命令会修改全局 console 状态，每个测试后复原。"""
    yield
    state.quiet = False
    state.debug = False


@pytest.fixture(scope="session")
def small_instances():
    """10 个 m=32, n=128, k=3 的固定种子实例。"""
    return [make_instance(32, 128, 3, 0.0, seed) for seed in range(10)]


@pytest.fixture(scope="session")
def descent_instances():
    """20 个 m=64, n=256, k=5 的固定种子实例。"""
    return [make_instance(64, 256, 5, 0.0, 1000 + seed) for seed in range(20)]


@pytest.fixture(scope="function")
def write_config(tmp_path: Path):
    """Writes a YAML config into tmp_path and returns its path."""
    def _write(content: dict, name: str = "config.yaml") -> Path:
        path = tmp_path / name
        path.write_text(yaml.dump(content, allow_unicode=True), "utf-8")
        return path
    return _write


@pytest.fixture(scope="function")
def quick_sweep_config(write_config):
    """A sweep small enough for the default test run."""
    return write_config({
        "problem": {"m": 32, "n": 96, "sparsity": {"start": 1, "stop": 3, "step": 1}},
        "experiment": {"trials": 2, "base_seed": 7},
        "solver": {"max_iter": 400},
        "algorithms": [
            {"rule": "half_eps", "p": 0.1},
            {"rule": "two_thirds_eps", "p": 0.0},
            "half",
            "two_thirds",
            "soft",
            "hard",
        ],
    })
