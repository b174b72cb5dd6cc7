"""End-to-end run behavior: equivalences, bookkeeping, determinism, compare."""
import dataclasses
import json

import numpy as np
import pytest

from driftcast.errors import ConfigError, MismatchedRuns
from driftcast.evaluation import EvaluationReport
from driftcast.ingest import DailyProfile, generate_synthetic
from driftcast.pipeline import (
    RunConfig,
    compare,
    render_comparison,
    run,
    run_active,
    run_baseline,
    run_passive,
)

def _small_series(seed=0, n_days=12):
    profile = DailyProfile(base=10.0, peaks=((9.0, 2.0, 4.0),))
    return generate_synthetic(profile, [], noise_sd=0.4, seed=seed, n_days=n_days)


def _small_config(mode="baseline", tau=None, seed=0):
    return RunConfig(mode=mode, tau=tau, load_bandwidth=1.0,
                     hpo_initial_budget=1, hpo_adapt_budget=1, hpo_fit_epochs=1,
                     epochs_initial=3, epochs_incremental=1, patience=2, seed=seed,
                     deterministic_timing=True, learning_rates=(0.01,),
                     dropout_rates=(0.0,), n_units_values=(6,))
    # 12 days -> 9 pool (8 train + 1 validation) + 3 test


def _error_payload(report: EvaluationReport) -> bytes:
    """The mode-independent content: errors, costs, split, input identity."""
    data = report.to_dict()
    for key in ("mode", "tau", "drift_decisions"):
        data.pop(key)
    return json.dumps(data, sort_keys=True).encode()


class TestConfig:
    def test_active_requires_tau(self):
        with pytest.raises(ConfigError):
            RunConfig(mode="active").validate()

    def test_tau_forbidden_outside_active(self):
        with pytest.raises(ConfigError):
            RunConfig(mode="passive", tau=0.1).validate()

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"mode": "baseline", "warp_speed": 9})

    def test_dict_round_trip(self):
        config = _small_config("active", tau=0.1)
        assert RunConfig.from_dict(config.to_dict()) == config

    def test_bad_mode_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig(mode="hybrid").validate()


class TestBaseline:
    def test_never_adapts(self):
        report = run_baseline(_small_config(), _small_series())
        assert report.adaptation_count == 0
        assert report.drift_decisions == ()
        assert [e.kind for e in report.ledger.entries] == ["initial_training"]

    def test_deterministic_reports(self):
        first = run_baseline(_small_config(), _small_series())
        second = run_baseline(_small_config(), _small_series())
        assert first.to_json() == second.to_json()

    def test_report_round_trips_through_schema(self):
        report = run_baseline(_small_config(), _small_series())
        assert EvaluationReport.from_json(report.to_json()) == report


class TestPassive:
    def test_one_adaptation_per_test_day(self):
        report = run_passive(_small_config("passive"), _small_series())
        assert report.adaptation_count == report.split["test_days"] == 3
        adaptations = [e for e in report.ledger.entries if e.kind == "adaptation"]
        assert len(adaptations) == 3
        assert [e.day_index for e in adaptations] == \
               [d.day_index for d in report.daily_errors]

    def test_hpo_events_cover_every_update(self):
        report = run_passive(_small_config("passive"), _small_series())
        assert [h.event for h in report.hpo_events] == [0, 1, 2, 3]
        assert report.hpo_events[0].day_index is None

    def test_beats_baseline_on_drift_scenario(self, scenario_sweep):
        wins = sum(r["passive"].mean_mape < r["baseline"].mean_mape
                   for r in scenario_sweep.values())
        assert wins >= 0.9 * len(scenario_sweep)


class TestActive:
    def test_tau_zero_reproduces_baseline_errors_bitwise(self):
        series = _small_series()
        baseline = run_baseline(_small_config(), series)
        zero = run_active(_small_config("active", tau=0.0), series)
        assert zero.adaptation_count == 0
        assert all(not d.is_drift for d in zero.drift_decisions)
        assert _error_payload(zero) == _error_payload(baseline)

    def test_tau_one_adapts_like_passive(self):
        series = _small_series()
        passive = run_passive(_small_config("passive"), series)
        one = run_active(_small_config("active", tau=1.0), series)
        assert one.adaptation_count == passive.adaptation_count == 3

    def test_decisions_recorded_every_day(self):
        report = run_active(_small_config("active", tau=0.1), _small_series())
        assert len(report.drift_decisions) == report.split["test_days"]
        assert report.adaptation_count == sum(d.is_drift for d in report.drift_decisions)

    def test_sensitivity_ordering_across_taus(self, scenario_sweep):
        for result in scenario_sweep.values():
            assert (result["active_007"].adaptation_count
                    <= result["active_010"].adaptation_count
                    <= result["active_015"].adaptation_count)

    def test_run_dispatches_by_mode(self):
        series = _small_series()
        report = run(_small_config("active", tau=0.5), series)
        assert report.mode == "active"
        assert report.tau == 0.5


class TestNoLeakage:
    def test_future_mutation_leaves_past_errors_unchanged(self):
        series = _small_series()
        baseline = run_baseline(_small_config(), series)

        mutated_values = series.values.copy()
        mutated_values[-60] += 3.0  # inside the final test day
        mutated_series = dataclasses.replace(series, values=mutated_values)
        mutated = run_baseline(_small_config(), mutated_series)

        original = [(e.day_index, e.mape, e.rmse) for e in baseline.daily_errors]
        perturbed = [(e.day_index, e.mape, e.rmse) for e in mutated.daily_errors]
        assert original[:-1] == perturbed[:-1]
        assert original[-1] != perturbed[-1]


class TestCosts:
    def test_cost_monotonicity_baseline_active_passive(self, scenario_sweep):
        for result in scenario_sweep.values():
            base = result["baseline"].total_cost
            passive = result["passive"].total_cost
            for key in ("active_007", "active_010", "active_015"):
                assert base <= result[key].total_cost <= passive

    def test_deterministic_timing_is_reproducible(self):
        first = run_passive(_small_config("passive"), _small_series())
        second = run_passive(_small_config("passive"), _small_series())
        assert [e.duration for e in first.ledger.entries] == \
               [e.duration for e in second.ledger.entries]


class TestCompare:
    def test_baseline_versus_itself(self):
        report = run_baseline(_small_config(), _small_series())
        result = compare(report, [report])
        row = result["rows"][1]
        assert row["improvement_mape"] == 0.0
        assert row["trade_off_score"] == 0.0

    def test_mismatched_series_rejected(self):
        first = run_baseline(_small_config(), _small_series(seed=0))
        second = run_baseline(_small_config(), _small_series(seed=1))
        with pytest.raises(MismatchedRuns):
            compare(first, [second])

    def test_passive_improvement_dominates_most_sensitive_active(self, scenario_sweep):
        wins = 0
        for result in scenario_sweep.values():
            rows = compare(result["baseline"],
                           [result["passive"], result["active_007"]])["rows"]
            passive_imp = rows[1]["improvement_mape"]
            active_imp = rows[2]["improvement_mape"]
            wins += passive_imp >= active_imp
        assert wins >= 0.7 * len(scenario_sweep)

    def test_text_rendering_contains_all_rows(self):
        report = run_baseline(_small_config(), _small_series())
        text = render_comparison(compare(report, [report]))
        assert text.count("baseline") == 2
        assert "TS" in text


class TestStructuralRetune:
    def test_full_retrain_flag_changes_structure_when_beneficial(self):
        config = dataclasses.replace(
            _small_config("active", tau=1.0),  # adapt every day
            retune_units_full_retrain=True,
            n_units_values=(4, 6),
            hpo_adapt_budget=2,
        )
        report = run_active(config, _small_series())
        assert report.adaptation_count == 3
        # every adaptation re-tuned the full space; events must carry units
        tuned_units = {h.n_units for h in report.hpo_events if h.event > 0}
        assert tuned_units <= {4, 6}
