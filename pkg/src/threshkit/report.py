import csv
import json
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from jinja2 import Environment

from . import __version__
from .experiments import AlgorithmEntry, SuccessCurve, SuccessPoint

CURVE_HEADER = ["sparsity", "success_rate", "mean_re", "mean_iterations"]
COMBINED_HEADER = ["algorithm", "p"] + CURVE_HEADER
COMBINED_FILENAME = "combined.csv"
MANIFEST_FILENAME = "manifest.json"
SUCCESS_LEVEL = 0.9

_env = Environment(autoescape=False, trim_blocks=True, lstrip_blocks=True, keep_trailing_newline=True)

PLOT_SERIES_TEMPLATE = _env.from_string(
    "sparsity\tsuccess_rate\n"
    "{% for point in points %}\n"
    "{{ point.sparsity }}\t{{ fmt(point.success_rate) }}\n"
    "{% endfor %}"
)

SUMMARY_TEMPLATE = _env.from_string(
    "{{ '%-4s' | format('rank') }} {{ '%-22s' | format('algorithm') }} largest k with success_rate >= {{ level }}\n"
    "{% for row in rows %}\n"
    "{{ '%-4s' | format(loop.index) }} {{ '%-22s' | format(row.name) }} {{ row.largest if row.largest is not none else '-' }}\n"
    "{% endfor %}"
)


class ReportError(Exception):
    def __init__(self, message: str, path: Optional[Path] = None):
        super().__init__(message)
        self.path = path


def fmt(value: float) -> str:
    # 17 位有效数字，解析回去与原值逐位相同
    return format(value, ".17g")


@dataclass(frozen=True)
class SummaryRow:
    name: str
    label: str
    largest: Optional[int]


@dataclass
class RunManifest:
    spec: Dict[str, Any]
    version: str
    timestamp: str
    runtime_seconds: float
    cell_statistics: List[Dict[str, Any]]


def _write_text(path: Path, content: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as handle:
            handle.write(content)
    except OSError as e:
        raise ReportError(f"写入 '{path}' 失败: {e}", path=path) from e


def _write_rows(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as e:
        raise ReportError(f"写入 '{path}' 失败: {e}", path=path) from e


def _point_row(point: SuccessPoint) -> List[str]:
    return [str(point.sparsity), fmt(point.success_rate), fmt(point.mean_re), fmt(point.mean_iterations)]


def write_curve_csv(curve: SuccessCurve, path: Path) -> Path:
    _write_rows(path, CURVE_HEADER, [_point_row(point) for point in curve.points])
    return path


def write_combined_csv(curves: Sequence[SuccessCurve], path: Path) -> Path:
    rows = [
        [curve.algorithm.rule.value, "" if curve.algorithm.p is None else fmt(curve.algorithm.p)]
        + _point_row(point)
        for curve in curves
        for point in curve.points
    ]
    _write_rows(path, COMBINED_HEADER, rows)
    return path


def read_curve_csv(path: Path, algorithm: AlgorithmEntry, trials: int) -> SuccessCurve:
    """Parse a per-algorithm CSV back into a SuccessCurve (trial outcomes are not stored)."""
    try:
        with path.open("r", encoding="utf-8", newline="") as handle:
            rows = list(csv.DictReader(handle))
    except OSError as e:
        raise ReportError(f"读取 '{path}' 失败: {e}", path=path) from e
    points = tuple(
        SuccessPoint(
            sparsity=int(row["sparsity"]),
            successes=round(float(row["success_rate"]) * trials),
            trials=trials,
            mean_re=float(row["mean_re"]),
            mean_iterations=float(row["mean_iterations"]),
        )
        for row in rows
    )
    return SuccessCurve(algorithm=algorithm, points=points)


def emit_plot_data(curves: Sequence[SuccessCurve], out_dir: Path) -> List[Path]:
    """One TSV series per algorithm: x = sparsity, y = success_rate."""
    if not curves:
        raise ReportError("没有可输出的成功率曲线", path=out_dir)
    paths = []
    for curve in curves:
        path = out_dir / f"{curve.label}.tsv"
        _write_text(path, PLOT_SERIES_TEMPLATE.render(points=curve.points, fmt=fmt))
        paths.append(path)
    return paths


def summarize_phase_transition(
    curves: Sequence[SuccessCurve], level: float = SUCCESS_LEVEL
) -> List[SummaryRow]:
    """每个算法 success_rate ≥ level 的最大稀疏度，按该值降序排列。"""
    rows = []
    for curve in curves:
        passing = [point.sparsity for point in curve.points if point.success_rate >= level]
        rows.append(
            SummaryRow(
                name=curve.algorithm.display_name,
                label=curve.label,
                largest=max(passing) if passing else None,
            )
        )
    # sorted 是稳定的，并列时保持配置中的顺序
    return sorted(rows, key=lambda row: -1 if row.largest is None else row.largest, reverse=True)


def render_summary(rows: Sequence[SummaryRow], level: float = SUCCESS_LEVEL) -> str:
    return SUMMARY_TEMPLATE.render(rows=rows, level=level)


def cell_statistics(curves: Sequence[SuccessCurve]) -> List[Dict[str, Any]]:
    stats = []
    for curve in curves:
        for point in curve.points:
            iterations = [outcome.iterations for outcome in point.outcomes]
            stats.append(
                {
                    "algorithm": curve.label,
                    "sparsity": point.sparsity,
                    "successes": point.successes,
                    "trials": point.trials,
                    "min_iterations": min(iterations) if iterations else None,
                    "mean_iterations": point.mean_iterations,
                    "max_iterations": max(iterations) if iterations else None,
                    "converged": sum(1 for outcome in point.outcomes if outcome.converged),
                }
            )
    return stats


def build_manifest(spec_echo: Dict[str, Any], curves: Sequence[SuccessCurve], runtime_seconds: float) -> RunManifest:
    return RunManifest(
        spec=spec_echo,
        version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(),
        runtime_seconds=runtime_seconds,
        cell_statistics=cell_statistics(curves),
    )


def write_manifest(manifest: RunManifest, path: Path) -> Path:
    _write_text(path, json.dumps(asdict(manifest), indent=2, ensure_ascii=False) + "\n")
    return path


def write_sweep_outputs(curves: Sequence[SuccessCurve], out_dir: Path) -> Tuple[List[Path], Path, List[Path]]:
    """Per-algorithm CSVs, the combined long-format CSV and the TSV plot series."""
    curve_paths = [write_curve_csv(curve, out_dir / f"{curve.label}.csv") for curve in curves]
    combined = write_combined_csv(curves, out_dir / COMBINED_FILENAME)
    plot_paths = emit_plot_data(curves, out_dir)
    return curve_paths, combined, plot_paths
