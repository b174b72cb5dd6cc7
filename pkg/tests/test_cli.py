"""CLI subcommands, config handling and exit codes."""
import json

import numpy as np
import pytest

from driftcast.cli import EXIT_CONFIG, EXIT_INPUT, EXIT_OK, EXIT_RUNTIME, main
from driftcast.evaluation import EvaluationReport
from driftcast.ingest import parse_load_csv

RUN_CONFIG = {
    "load_bandwidth": 1.0,
    "hpo_initial_budget": 1,
    "hpo_adapt_budget": 1,
    "hpo_fit_epochs": 1,
    "epochs_initial": 3,
    "epochs_incremental": 1,
    "patience": 2,
    "deterministic_timing": True,
    "learning_rates": [0.01],
    "dropout_rates": [0.0],
    "n_units_values": [6],
}

PROFILE = {
    "base": 10.0,
    "peaks": [[9.0, 2.0, 4.0]],
    "noise_sd": 0.4,
    "events": [{"day": 10, "kind": "mean_shift", "magnitude": 5.0}],
}


@pytest.fixture
def workspace(tmp_path):
    profile = tmp_path / "profile.json"
    profile.write_text(json.dumps(PROFILE), encoding="utf-8")
    config = tmp_path / "config.json"
    config.write_text(json.dumps(RUN_CONFIG), encoding="utf-8")
    return tmp_path


def _synth(workspace, out="series.csv", days=12, seed=3):
    path = workspace / out
    code = main(["synth", "--profile", str(workspace / "profile.json"),
                 "--seed", str(seed), "--days", str(days), "--out", str(path)])
    assert code == EXIT_OK
    return path


class TestSynthAndIngest:
    def test_synth_writes_parseable_canonical_csv(self, workspace):
        path = _synth(workspace)
        series = parse_load_csv(path)
        assert len(series) == 12 * 144
        assert series.is_gapless

    def test_ingest_round_trip_with_report(self, workspace, capsys):
        path = _synth(workspace)
        out = workspace / "canonical.csv"
        report_path = workspace / "segmentation.json"
        code = main(["ingest", str(path), "--out", str(out),
                     "--report", str(report_path)])
        assert code == EXIT_OK
        segmentation = json.loads(report_path.read_text())
        assert segmentation["complete_days"] == 12
        assert segmentation["resolution_minutes"] == 60 / 6

    def test_ingest_missing_file_is_input_error(self, workspace):
        code = main(["ingest", str(workspace / "nope.csv"),
                     "--out", str(workspace / "out.csv")])
        assert code == EXIT_INPUT

    def test_synth_event_outside_range_is_input_error(self, workspace):
        bad_profile = workspace / "bad.json"
        bad_profile.write_text(json.dumps({**PROFILE,
                                           "events": [{"day": 99, "kind": "mean_shift",
                                                       "magnitude": 1.0}]}))
        code = main(["synth", "--profile", str(bad_profile), "--seed", "1",
                     "--days", "10", "--out", str(workspace / "s.csv")])
        assert code == EXIT_INPUT


class TestRun:
    def test_baseline_run_writes_valid_report(self, workspace):
        series = _synth(workspace)
        out = workspace / "report.json"
        code = main(["run", "--mode", "baseline", "--config",
                     str(workspace / "config.json"), "--input", str(series),
                     "--out", str(out)])
        assert code == EXIT_OK
        report = EvaluationReport.from_json(out.read_text())
        assert report.mode == "baseline"
        assert report.adaptation_count == 0

    def test_identical_invocations_are_byte_identical(self, workspace):
        series = _synth(workspace)
        first = workspace / "first.json"
        second = workspace / "second.json"
        args = ["run", "--mode", "passive", "--config",
                str(workspace / "config.json"), "--input", str(series), "--seed", "5"]
        assert main(args + ["--out", str(first)]) == EXIT_OK
        assert main(args + ["--out", str(second)]) == EXIT_OK
        assert first.read_bytes() == second.read_bytes()

    def test_active_without_tau_is_config_error(self, workspace):
        series = _synth(workspace)
        code = main(["run", "--mode", "active", "--config",
                     str(workspace / "config.json"), "--input", str(series),
                     "--out", str(workspace / "r.json")])
        assert code == EXIT_CONFIG

    def test_unknown_config_key_is_config_error(self, workspace):
        series = _synth(workspace)
        bad = workspace / "bad_config.json"
        bad.write_text(json.dumps({**RUN_CONFIG, "bogus_option": 1}))
        code = main(["run", "--mode", "baseline", "--config", str(bad),
                     "--input", str(series), "--out", str(workspace / "r.json")])
        assert code == EXIT_CONFIG

    def test_too_few_days_is_input_error(self, workspace):
        quiet_profile = workspace / "quiet.json"
        quiet_profile.write_text(json.dumps({**PROFILE, "events": []}))
        series = workspace / "short.csv"
        assert main(["synth", "--profile", str(quiet_profile), "--seed", "3",
                     "--days", "4", "--out", str(series)]) == EXIT_OK
        code = main(["run", "--mode", "baseline", "--config",
                     str(workspace / "config.json"), "--input", str(series),
                     "--out", str(workspace / "r.json")])
        assert code == EXIT_INPUT

    def test_zero_consumption_is_runtime_failure(self, workspace):
        zero_profile = workspace / "zero.json"
        zero_profile.write_text(json.dumps({"base": 0.0, "peaks": [],
                                            "noise_sd": 0.0}))
        series = workspace / "zeros.csv"
        assert main(["synth", "--profile", str(zero_profile), "--seed", "1",
                     "--days", "12", "--out", str(series)]) == EXIT_OK
        code = main(["run", "--mode", "baseline", "--config",
                     str(workspace / "config.json"), "--input", str(series),
                     "--out", str(workspace / "r.json")])
        assert code == EXIT_RUNTIME


class TestCompareAndReport:
    def _two_reports(self, workspace):
        series = _synth(workspace)
        base_out = workspace / "base.json"
        passive_out = workspace / "passive.json"
        common = ["--config", str(workspace / "config.json"),
                  "--input", str(series)]
        assert main(["run", "--mode", "baseline", *common,
                     "--out", str(base_out)]) == EXIT_OK
        assert main(["run", "--mode", "passive", *common,
                     "--out", str(passive_out)]) == EXIT_OK
        return base_out, passive_out

    def test_compare_writes_table(self, workspace, capsys):
        base_out, passive_out = self._two_reports(workspace)
        table = workspace / "table.json"
        code = main(["compare", "--baseline", str(base_out),
                     "--candidate", str(passive_out), "--out", str(table)])
        assert code == EXIT_OK
        rows = json.loads(table.read_text())["rows"]
        assert [row["mode"] for row in rows] == ["baseline", "passive"]
        printed = capsys.readouterr().out
        assert "passive" in printed

    def test_compare_rejects_mismatched_inputs(self, workspace):
        base_out, _ = self._two_reports(workspace)
        other_series = _synth(workspace, out="other.csv", seed=9)
        other_out = workspace / "other.json"
        assert main(["run", "--mode", "baseline", "--config",
                     str(workspace / "config.json"), "--input", str(other_series),
                     "--out", str(other_out)]) == EXIT_OK
        code = main(["compare", "--baseline", str(base_out),
                     "--candidate", str(other_out)])
        assert code == EXIT_INPUT

    def test_report_text_and_csv(self, workspace, capsys):
        base_out, _ = self._two_reports(workspace)
        assert main(["report", "--in", str(base_out)]) == EXIT_OK
        text = capsys.readouterr().out
        assert "mean MAPE" in text
        assert main(["report", "--in", str(base_out), "--format", "csv"]) == EXIT_OK
        csv_text = capsys.readouterr().out
        assert csv_text.startswith("day_index,mape,rmse")
        assert len(csv_text.strip().splitlines()) == 4  # header + 3 test days

    def test_report_on_garbage_is_input_error(self, workspace):
        garbage = workspace / "garbage.json"
        garbage.write_text("{not json")
        assert main(["report", "--in", str(garbage)]) == EXIT_INPUT
