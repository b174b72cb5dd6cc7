"""End-to-end runs: never-adapt baseline, passive and active adaptation.

The temporal loop is the same in all three modes. Each test day is
predicted with the model as of the previous day's close, its 24 hourly
errors are recorded, and only then may the model adapt: every day in
passive mode, on detector alarms in active mode, never in baseline mode.
An adaptation tunes the non-structural hyperparameters on the new day's
windows and resumes training from the stored weights, so the update
benefits the *following* day. The detector state advances on every day
regardless of the drift flag.

Setting tau to 0 reproduces the baseline exactly; tau of 1 adapts every
day like the passive mode.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from datetime import date
from typing import Optional, Sequence

import numpy as np

from .drift import DriftDecision, advance, decide, init_drift_state
from .errors import ConfigError, MismatchedRuns
from .evaluation import (
    DEFAULT_EPSILON_ZERO,
    DEFAULT_PRICE_RATE,
    CostLedger,
    DailyError,
    EvaluationReport,
    HpoEventRecord,
    daily_error,
    improvement,
    mape as mape_metric,
    record_cost,
    series_digest,
    summarize_daily,
)
from .forecaster import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_HORIZON,
    DEFAULT_INPUT_LEN,
    DEFAULT_PATIENCE,
    ForecastModel,
    Hyperparameters,
    NormStats,
    SupervisedWindow,
    batch_forward,
    build_windows,
    incremental_update,
    new_model,
    predict_day,
    stack_windows,
    train,
)
from .hpo import (
    DEFAULT_DROPOUT_RATES,
    DEFAULT_LEARNING_RATES,
    DEFAULT_N_UNITS,
    SearchSpace,
    TrialRecord,
    optimize,
)
from .ingest import (
    DaySample,
    LoadSeries,
    SplitSpec,
    resample_and_fill,
    segment_days,
    split_dataset,
)

MODES = ("baseline", "passive", "active")


@dataclass(frozen=True)
class RunConfig:
    mode: str = "baseline"
    tau: Optional[float] = None
    load_bandwidth: float = 10.0
    grid_points: int = 512
    split: SplitSpec = field(default_factory=SplitSpec)
    input_len: int = DEFAULT_INPUT_LEN
    horizon: int = DEFAULT_HORIZON
    hpo_initial_budget: int = 15
    hpo_adapt_budget: int = 8
    hpo_fit_epochs: int = 3
    epochs_initial: int = 50
    epochs_incremental: int = 10
    batch_size: int = DEFAULT_BATCH_SIZE
    patience: int = DEFAULT_PATIENCE
    price_rate: float = DEFAULT_PRICE_RATE
    seed: int = 0
    max_gap: int = 6
    deterministic_timing: bool = False
    timing_coefficient: float = 1e-3
    learning_rates: tuple[float, ...] = DEFAULT_LEARNING_RATES
    dropout_rates: tuple[float, ...] = DEFAULT_DROPOUT_RATES
    n_units_values: tuple[int, ...] = DEFAULT_N_UNITS
    use_rank_fallback: bool = False
    exclude_zero_actuals: bool = False
    epsilon_zero: float = DEFAULT_EPSILON_ZERO
    retune_units_full_retrain: bool = False

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "active":
            if self.tau is None:
                raise ConfigError("active mode requires tau")
            if not 0.0 <= self.tau <= 1.0:
                raise ConfigError(f"tau must lie in [0, 1], got {self.tau}")
        elif self.tau is not None:
            raise ConfigError(f"tau only applies to active mode, not {self.mode!r}")
        for name in ("hpo_initial_budget", "hpo_adapt_budget", "hpo_fit_epochs",
                     "epochs_initial", "epochs_incremental", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.load_bandwidth <= 0:
            raise ConfigError("load_bandwidth must be > 0")
        if self.price_rate <= 0:
            raise ConfigError("price_rate must be > 0")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "tau": self.tau,
            "load_bandwidth": self.load_bandwidth,
            "grid_points": self.grid_points,
            "split": {
                "train_fraction": self.split.train_fraction,
                "validation_fraction_of_train": self.split.validation_fraction_of_train,
            },
            "input_len": self.input_len,
            "horizon": self.horizon,
            "hpo_initial_budget": self.hpo_initial_budget,
            "hpo_adapt_budget": self.hpo_adapt_budget,
            "hpo_fit_epochs": self.hpo_fit_epochs,
            "epochs_initial": self.epochs_initial,
            "epochs_incremental": self.epochs_incremental,
            "batch_size": self.batch_size,
            "patience": self.patience,
            "price_rate": self.price_rate,
            "seed": self.seed,
            "max_gap": self.max_gap,
            "deterministic_timing": self.deterministic_timing,
            "timing_coefficient": self.timing_coefficient,
            "learning_rates": list(self.learning_rates),
            "dropout_rates": list(self.dropout_rates),
            "n_units_values": list(self.n_units_values),
            "use_rank_fallback": self.use_rank_fallback,
            "exclude_zero_actuals": self.exclude_zero_actuals,
            "epsilon_zero": self.epsilon_zero,
            "retune_units_full_retrain": self.retune_units_full_retrain,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = dict(data)
        split_data = known.pop("split", None)
        split = SplitSpec(**split_data) if split_data else SplitSpec()
        for key in ("learning_rates", "dropout_rates", "n_units_values"):
            if key in known:
                known[key] = tuple(known[key])
        unknown = set(known) - {f for f in cls.__dataclass_fields__ if f != "split"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(split=split, **known)


def _derived_seed(seed: int, *parts: int) -> int:
    """Stable 31-bit sub-seed for a named stream of the run."""
    rng = np.random.default_rng([seed, 7, *parts])
    return int(rng.integers(0, 2**31 - 1))


# --- preparation ------------------------------------------------------------


@dataclass
class PreparedRun:
    series: LoadSeries
    digest: str
    train_days: list[DaySample]
    validation_days: list[DaySample]
    test_days: list[DaySample]
    norm: NormStats
    train_windows: list[SupervisedWindow]
    val_windows: list[SupervisedWindow]

    @property
    def pretest_days(self) -> list[DaySample]:
        return self.train_days + self.validation_days

    def split_sizes(self) -> dict:
        return {
            "train_days": len(self.train_days),
            "validation_days": len(self.validation_days),
            "test_days": len(self.test_days),
        }


def prepare_run(config: RunConfig, series: LoadSeries) -> PreparedRun:
    config.validate()
    filled = resample_and_fill(series, config.max_gap)
    days = list(segment_days(filled))
    train_days, val_days, test_days = split_dataset(days, config.split)
    norm = NormStats.fit(np.concatenate([d.readings for d in train_days]))
    train_windows = build_windows(norm.normalize(np.concatenate([d.readings for d in train_days])),
                                  config.input_len, config.horizon)
    val_windows = build_windows(norm.normalize(np.concatenate([d.readings for d in val_days])),
                                config.input_len, config.horizon)
    return PreparedRun(series=filled, digest=series_digest(filled.values),
                       train_days=train_days, validation_days=val_days,
                       test_days=test_days, norm=norm,
                       train_windows=train_windows, val_windows=val_windows)


# --- scoring helpers -----------------------------------------------------------


def _validation_mape(model_norm: NormStats, weights, windows) -> float:
    inputs, targets = stack_windows(windows)
    predicted = batch_forward(weights, inputs)
    return mape_metric(model_norm.denormalize(targets),
                       model_norm.denormalize(predicted))


def _day_windows(norm: NormStats, day: DaySample, config: RunConfig,
                 ) -> list[SupervisedWindow]:
    return build_windows(norm.normalize(day.readings), config.input_len, config.horizon)


# --- the three phases ------------------------------------------------------------


def _initial_model(config: RunConfig, prep: PreparedRun,
                   ) -> tuple[ForecastModel, float, HpoEventRecord]:
    """Full-space HPO plus training; returns model, duration and the record."""
    space = SearchSpace(learning_rates=config.learning_rates,
                        dropout_rates=config.dropout_rates,
                        n_units_values=config.n_units_values)
    trained: dict[tuple, ForecastModel] = {}

    def objective(hp: Hyperparameters) -> float:
        candidate = new_model(hp, prep.norm, config.input_len, config.horizon,
                              rng_seed=config.seed)
        fitted = train(candidate, prep.train_windows, prep.val_windows,
                       epochs=config.epochs_initial, batch_size=config.batch_size,
                       patience=config.patience)
        trained[(hp.learning_rate, hp.dropout_rate, hp.n_units)] = fitted
        return _validation_mape(prep.norm, fitted.weights, prep.val_windows)

    started = time.perf_counter()
    timer = (lambda: 0.0) if config.deterministic_timing else time.perf_counter
    best_hp, trials = optimize(objective, space, budget=config.hpo_initial_budget,
                               seed=_derived_seed(config.seed, 0), timer=timer)
    model = trained[(best_hp.learning_rate, best_hp.dropout_rate, best_hp.n_units)]

    if config.deterministic_timing:
        duration = (config.timing_coefficient * config.epochs_initial
                    * max(len(prep.train_windows), 1) * len(trials))
    else:
        duration = time.perf_counter() - started
    best_score = min(t.score for t in trials)
    record = HpoEventRecord(event=0, day_index=None,
                            learning_rate=best_hp.learning_rate,
                            dropout_rate=best_hp.dropout_rate,
                            n_units=best_hp.n_units, loss=best_score)
    return model, duration, record


def _tune_adaptation(config: RunConfig, model: ForecastModel,
                     day_windows: Sequence[SupervisedWindow],
                     score_windows: Sequence[SupervisedWindow],
                     norm: NormStats, event: int,
                     ) -> tuple[Hyperparameters, float, list[TrialRecord]]:
    """Non-structural HPO for one adaptation: short resumed fits, scored on
    the most recent complete day."""
    space = SearchSpace.frozen(model.hyperparameters.n_units,
                               learning_rates=config.learning_rates,
                               dropout_rates=config.dropout_rates)

    def objective(hp: Hyperparameters) -> float:
        probe = incremental_update(model, day_windows, hp,
                                   epochs=config.hpo_fit_epochs,
                                   batch_size=config.batch_size)
        return _validation_mape(norm, probe.weights, score_windows)

    started = time.perf_counter()
    timer = (lambda: 0.0) if config.deterministic_timing else time.perf_counter
    best_hp, trials = optimize(objective, space, budget=config.hpo_adapt_budget,
                               seed=_derived_seed(config.seed, 1, event), timer=timer)
    if config.deterministic_timing:
        duration = (config.timing_coefficient * config.hpo_fit_epochs
                    * max(len(day_windows), 1) * len(trials))
    else:
        duration = time.perf_counter() - started
    return best_hp, duration, trials


def _update_model(config: RunConfig, prep: PreparedRun, model: ForecastModel,
                  day: DaySample, seen_test_days: list[DaySample], event: int,
                  ) -> tuple[ForecastModel, float, Hyperparameters, float]:
    """One adaptation event; returns (model, duration, chosen hp, loss)."""
    day_windows = _day_windows(prep.norm, day, config)
    previous_day = seen_test_days[-1] if seen_test_days else prep.pretest_days[-1]
    score_windows = _day_windows(prep.norm, previous_day, config)

    if config.retune_units_full_retrain:
        return _full_retrain(config, prep, model, day, seen_test_days, event)

    tuned, hpo_duration, trials = _tune_adaptation(config, model, day_windows,
                                                   score_windows, prep.norm, event)
    started = time.perf_counter()
    updated = incremental_update(model, day_windows, tuned,
                                 epochs=config.epochs_incremental,
                                 batch_size=config.batch_size)
    if config.deterministic_timing:
        fit_duration = (config.timing_coefficient * config.epochs_incremental
                        * max(len(day_windows), 1))
    else:
        fit_duration = time.perf_counter() - started
    loss = min(t.score for t in trials)
    return updated, hpo_duration + fit_duration, tuned, loss


def _full_retrain(config: RunConfig, prep: PreparedRun, model: ForecastModel,
                  day: DaySample, seen_test_days: list[DaySample], event: int,
                  ) -> tuple[ForecastModel, float, Hyperparameters, float]:
    """Opt-in structural retune: rebuild the network on everything seen."""
    history = prep.train_days + prep.validation_days + seen_test_days + [day]
    windows = build_windows(
        prep.norm.normalize(np.concatenate([d.readings for d in history])),
        config.input_len, config.horizon)
    space = SearchSpace(learning_rates=config.learning_rates,
                        dropout_rates=config.dropout_rates,
                        n_units_values=config.n_units_values)
    trained: dict[tuple, ForecastModel] = {}

    def objective(hp: Hyperparameters) -> float:
        candidate = new_model(hp, prep.norm, config.input_len, config.horizon,
                              rng_seed=config.seed)
        fitted = train(candidate, windows, prep.val_windows,
                       epochs=config.epochs_initial, batch_size=config.batch_size,
                       patience=config.patience)
        trained[(hp.learning_rate, hp.dropout_rate, hp.n_units)] = fitted
        return _validation_mape(prep.norm, fitted.weights, prep.val_windows)

    started = time.perf_counter()
    timer = (lambda: 0.0) if config.deterministic_timing else time.perf_counter
    best_hp, trials = optimize(objective, space, budget=config.hpo_adapt_budget,
                               seed=_derived_seed(config.seed, 2, event), timer=timer)
    retrained = trained[(best_hp.learning_rate, best_hp.dropout_rate, best_hp.n_units)]
    retrained = replace(retrained, version=model.version + 1)
    if config.deterministic_timing:
        duration = (config.timing_coefficient * config.epochs_initial
                    * max(len(windows), 1) * len(trials))
    else:
        duration = time.perf_counter() - started
    loss = min(t.score for t in trials)
    return retrained, duration, best_hp, loss


# --- run modes ---------------------------------------------------------------


def _score_day(config: RunConfig, model: ForecastModel, context: np.ndarray,
               day: DaySample) -> DailyError:
    forecasts = predict_day(model, context, day.readings)
    steps = day.readings.size // 24
    pairs = [(day.readings[h * steps : (h + 1) * steps], forecasts[h])
             for h in range(24)]
    return daily_error(day.day, pairs, epsilon_zero=config.epsilon_zero,
                       exclude_zero_actuals=config.exclude_zero_actuals)


def _build_report(config: RunConfig, prep: PreparedRun, mode: str,
                  daily_errors: list[DailyError],
                  decisions: list[DriftDecision],
                  adaptation_count: int, ledger: CostLedger,
                  hpo_events: list[HpoEventRecord]) -> EvaluationReport:
    stats = summarize_daily(daily_errors)
    return EvaluationReport(
        mode=mode, tau=config.tau, series_sha256=prep.digest, seed=config.seed,
        split=prep.split_sizes(), daily_errors=tuple(daily_errors),
        mean_mape=stats["mean_mape"], std_mape=stats["std_mape"],
        mean_rmse=stats["mean_rmse"], std_rmse=stats["std_rmse"],
        drift_decisions=tuple(decisions), adaptation_count=adaptation_count,
        ledger=ledger, hpo_events=tuple(hpo_events))


def run_baseline(config: RunConfig, series: LoadSeries) -> EvaluationReport:
    """Train once, predict every test day, never adapt."""
    config = replace(config, mode="baseline", tau=None)
    prep = prepare_run(config, series)
    model, duration, hpo_record = _initial_model(config, prep)
    ledger = record_cost(CostLedger(price_rate=config.price_rate),
                         prep.pretest_days[-1].day, "initial_training", duration)

    context = np.concatenate([d.readings for d in prep.pretest_days])
    daily_errors = []
    for day in prep.test_days:
        daily_errors.append(_score_day(config, model, context, day))
        context = np.concatenate([context, day.readings])
    return _build_report(config, prep, "baseline", daily_errors, [], 0, ledger,
                         [hpo_record])


def run_passive(config: RunConfig, series: LoadSeries) -> EvaluationReport:
    """Predict each day, then unconditionally adapt on that day's windows."""
    config = replace(config, mode="passive", tau=None)
    prep = prepare_run(config, series)
    model, duration, hpo_record = _initial_model(config, prep)
    ledger = record_cost(CostLedger(price_rate=config.price_rate),
                         prep.pretest_days[-1].day, "initial_training", duration)
    hpo_events = [hpo_record]

    context = np.concatenate([d.readings for d in prep.pretest_days])
    daily_errors = []
    seen: list[DaySample] = []
    for event, day in enumerate(prep.test_days, start=1):
        daily_errors.append(_score_day(config, model, context, day))
        model, duration, tuned, loss = _update_model(config, prep, model, day,
                                                     seen, event)
        ledger = record_cost(ledger, day.day, "hpo", 0.0)
        ledger = record_cost(ledger, day.day, "adaptation", duration)
        hpo_events.append(HpoEventRecord(
            event=event, day_index=day.day, learning_rate=tuned.learning_rate,
            dropout_rate=tuned.dropout_rate, n_units=tuned.n_units, loss=loss))
        seen.append(day)
        context = np.concatenate([context, day.readings])
    return _build_report(config, prep, "passive", daily_errors, [],
                         len(prep.test_days), ledger, hpo_events)


def run_active(config: RunConfig, series: LoadSeries) -> EvaluationReport:
    """Adapt only when the day's divergence is improbably large."""
    config.validate()
    if config.mode != "active" or config.tau is None:
        raise ConfigError("run_active requires mode='active' and a tau value")
    prep = prepare_run(config, series)
    model, duration, hpo_record = _initial_model(config, prep)
    ledger = record_cost(CostLedger(price_rate=config.price_rate),
                         prep.pretest_days[-1].day, "initial_training", duration)
    hpo_events = [hpo_record]

    state = init_drift_state(prep.pretest_days, config.load_bandwidth,
                             grid_points=config.grid_points,
                             use_rank_fallback=config.use_rank_fallback)
    context = np.concatenate([d.readings for d in prep.pretest_days])
    daily_errors = []
    decisions: list[DriftDecision] = []
    seen: list[DaySample] = []
    event = 0
    for day in prep.test_days:
        daily_errors.append(_score_day(config, model, context, day))
        decision = decide(state, day, config.tau)
        decisions.append(decision)
        if decision.is_drift:
            event += 1
            model, duration, tuned, loss = _update_model(config, prep, model, day,
                                                         seen, event)
            ledger = record_cost(ledger, day.day, "hpo", 0.0)
            ledger = record_cost(ledger, day.day, "adaptation", duration)
            hpo_events.append(HpoEventRecord(
                event=event, day_index=day.day, learning_rate=tuned.learning_rate,
                dropout_rate=tuned.dropout_rate, n_units=tuned.n_units, loss=loss))
        state = advance(state, day, decision.divergence)
        seen.append(day)
        context = np.concatenate([context, day.readings])
    return _build_report(config, prep, "active", daily_errors, decisions,
                         sum(d.is_drift for d in decisions), ledger, hpo_events)


def run(config: RunConfig, series: LoadSeries) -> EvaluationReport:
    config.validate()
    if config.mode == "baseline":
        return run_baseline(config, series)
    if config.mode == "passive":
        return run_passive(config, series)
    return run_active(config, series)


# --- comparison ---------------------------------------------------------------


def compare(baseline: EvaluationReport, candidates: Sequence[EvaluationReport],
            ) -> dict:
    """Per-candidate improvement, cost and trade-off against one baseline."""
    for report in candidates:
        if report.series_sha256 != baseline.series_sha256:
            raise MismatchedRuns("candidate report comes from a different input series")
        if report.split != baseline.split:
            raise MismatchedRuns("candidate report uses a different split")

    def label(report: EvaluationReport) -> str:
        if report.mode == "active":
            return f"active(tau={report.tau:g})"
        return report.mode

    rows = []
    for report in [baseline, *candidates]:
        imp_mape = improvement(report.mean_mape, baseline.mean_mape)
        imp_rmse = improvement(report.mean_rmse, baseline.mean_rmse)
        cost = report.total_cost
        if cost > 0:
            score = imp_mape / cost
        elif imp_mape == 0:
            score = 0.0  # no adaptations, no improvement: published convention
        else:
            score = None
        rows.append({
            "label": label(report),
            "mode": report.mode,
            "tau": report.tau,
            "mean_mape": report.mean_mape,
            "std_mape": report.std_mape,
            "mean_rmse": report.mean_rmse,
            "std_rmse": report.std_rmse,
            "improvement_mape": imp_mape,
            "improvement_rmse": imp_rmse,
            "adaptation_count": report.adaptation_count,
            "total_cost": cost,
            "trade_off_score": score,
        })
    return {"series_sha256": baseline.series_sha256, "split": dict(baseline.split),
            "rows": rows}


def render_comparison(comparison: dict) -> str:
    """Aligned text table of a compare() result."""
    headers = ["run", "mape", "std", "rmse", "std", "imp%", "adapts", "cost", "TS"]
    lines = []
    for row in comparison["rows"]:
        ts = row["trade_off_score"]
        lines.append([
            row["label"],
            f"{row['mean_mape']:.2f}", f"{row['std_mape']:.2f}",
            f"{row['mean_rmse']:.3f}", f"{row['std_rmse']:.3f}",
            f"{row['improvement_mape']:.2f}",
            str(row["adaptation_count"]),
            f"{row['total_cost']:.2f}",
            "-" if ts is None else f"{ts:.2f}",
        ])
    widths = [max(len(headers[i]), *(len(line[i]) for line in lines))
              for i in range(len(headers))]
    def fmt(cells):
        return "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(cells))
    return "\n".join([fmt(headers), fmt(["-" * w for w in widths]),
                      *[fmt(line) for line in lines]])
