import json
from pathlib import Path

import pytest

from threshkit.experiments import AlgorithmEntry, SuccessCurve, SuccessPoint, TrialOutcome
from threshkit.report import (
    COMBINED_HEADER,
    ReportError,
    build_manifest,
    emit_plot_data,
    read_curve_csv,
    render_summary,
    summarize_phase_transition,
    write_combined_csv,
    write_curve_csv,
    write_manifest,
    write_sweep_outputs,
)
from threshkit.solvers import ThresholdingRule


def make_curve(rule: ThresholdingRule, rates, p: float = 0.5, trials: int = 20) -> SuccessCurve:
    points = tuple(
        SuccessPoint(
            sparsity=k,
            successes=round(rate * trials),
            trials=trials,
            mean_re=1e-9 / 3 * k,
            mean_iterations=100.0 + k / 3,
        )
        for k, rate in zip(range(10, 10 + 10 * len(rates), 10), rates)
    )
    return SuccessCurve(algorithm=AlgorithmEntry(rule, p), points=points)


def test_plot_data_has_header_and_one_line_per_point(tmp_path: Path):
    curve = make_curve(ThresholdingRule.HARD, [1.0, 0.55, 0.0])
    [path] = emit_plot_data([curve], tmp_path)
    assert path.name == "hard.tsv"
    lines = path.read_text().splitlines()
    assert lines == ["sparsity\tsuccess_rate", "10\t1", "20\t0.55000000000000004", "30\t0"]


def test_paired_curves_share_x_columns(tmp_path: Path):
    curves = [
        make_curve(ThresholdingRule.HALF_EPS, [1.0, 0.9, 0.2], p=0.1),
        make_curve(ThresholdingRule.SOFT, [0.8, 0.1, 0.0]),
    ]
    columns = [
        [line.split("\t")[0] for line in path.read_text().splitlines()]
        for path in emit_plot_data(curves, tmp_path)
    ]
    assert columns[0] == columns[1]


def test_empty_plot_input_is_an_error(tmp_path: Path):
    with pytest.raises(ReportError):
        emit_plot_data([], tmp_path)


def test_curve_csv_round_trip(tmp_path: Path):
    curve = make_curve(ThresholdingRule.TWO_THIRDS_EPS, [1.0, 0.65, 0.05], p=0.0)
    path = write_curve_csv(curve, tmp_path / "curve.csv")
    assert read_curve_csv(path, curve.algorithm, trials=20) == curve


def test_read_missing_curve_is_an_error(tmp_path: Path):
    with pytest.raises(ReportError):
        read_curve_csv(tmp_path / "none.csv", AlgorithmEntry(ThresholdingRule.HARD), trials=20)


def test_combined_csv_is_long_format(tmp_path: Path):
    curves = [
        make_curve(ThresholdingRule.HALF_EPS, [1.0, 0.5], p=0.3),
        make_curve(ThresholdingRule.HARD, [1.0, 0.0]),
    ]
    lines = write_combined_csv(curves, tmp_path / "combined.csv").read_text().splitlines()
    assert lines[0] == ",".join(COMBINED_HEADER)
    assert [line.split(",")[:3] for line in lines[1:]] == [
        ["half_eps", "0.29999999999999999", "10"],
        ["half_eps", "0.29999999999999999", "20"],
        ["hard", "", "10"],
        ["hard", "", "20"],
    ]


def test_summary_ranks_by_largest_successful_sparsity():
    curves = [
        make_curve(ThresholdingRule.SOFT, [1.0, 0.5, 0.0]),
        make_curve(ThresholdingRule.HALF_EPS, [1.0, 1.0, 0.95], p=0.1),
        make_curve(ThresholdingRule.HARD, [0.2, 0.0, 0.0]),
        make_curve(ThresholdingRule.HALF, [1.0, 0.5, 0.0]),
    ]
    rows = summarize_phase_transition(curves)
    assert [row.label for row in rows] == ["half_eps_p0.1", "soft", "half", "hard"]
    assert [row.largest for row in rows] == [30, 10, 10, None]

    text = render_summary(rows).splitlines()
    assert text[0].startswith("rank")
    assert text[1].split()[:2] == ["1", "1/2-ε"]
    assert text[4].split()[-1] == "-"


def test_manifest_records_cell_statistics(tmp_path: Path):
    outcomes = (
        TrialOutcome(relative_error=1e-9, iterations=120, converged=True, success=True, instance_digest="a"),
        TrialOutcome(relative_error=0.5, iterations=5000, converged=False, success=False, instance_digest="b"),
    )
    point = SuccessPoint(sparsity=4, successes=1, trials=2, mean_re=0.25, mean_iterations=2560.0, outcomes=outcomes)
    curve = SuccessCurve(algorithm=AlgorithmEntry(ThresholdingRule.HARD), points=(point,))

    path = write_manifest(build_manifest({"problem": {"m": 8}}, [curve], 1.5), tmp_path / "manifest.json")
    manifest = json.loads(path.read_text())
    assert manifest["spec"] == {"problem": {"m": 8}}
    assert manifest["runtime_seconds"] == 1.5
    assert manifest["cell_statistics"] == [{
        "algorithm": "hard",
        "sparsity": 4,
        "successes": 1,
        "trials": 2,
        "min_iterations": 120,
        "mean_iterations": 2560.0,
        "max_iterations": 5000,
        "converged": 1,
    }]


def test_sweep_outputs_layout(tmp_path: Path):
    curves = [make_curve(ThresholdingRule.HALF, [1.0]), make_curve(ThresholdingRule.HARD, [0.5])]
    curve_paths, combined, plot_paths = write_sweep_outputs(curves, tmp_path / "nested" / "dir")
    assert [p.name for p in curve_paths] == ["half.csv", "hard.csv"]
    assert combined.name == "combined.csv"
    assert [p.name for p in plot_paths] == ["half.tsv", "hard.tsv"]
    assert all(p.exists() for p in curve_paths + plot_paths + [combined])
