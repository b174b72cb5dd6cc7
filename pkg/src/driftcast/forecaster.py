"""From-scratch LSTM forecaster with batch-wise incremental weight updates.

One LSTM layer (with peephole connections on all three gates) unrolled over
a 12-step input window, followed by a dense layer emitting the 6-step
forecast. Training is full backpropagation through time with Adam on a
mean-squared-error loss over min-max normalized values. Incremental
updates resume from the stored weights on new windows only, so previously
acquired patterns survive each adaptation.

All randomness flows through seeds carried on the model, so identical
seeds give identical weights, and inference never draws randomness at all.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import (
    DivergedLoss,
    EmptyTrainingSet,
    InsufficientContext,
    NonFiniteInput,
)

DEFAULT_INPUT_LEN = 12
DEFAULT_HORIZON = 6

DEFAULT_BATCH_SIZE = 32
DEFAULT_PATIENCE = 5

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8

_GATES = ("i", "f", "o", "z")


@dataclass(frozen=True)
class Hyperparameters:
    learning_rate: float
    dropout_rate: float
    n_units: int

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.n_units < 1:
            raise ValueError("n_units must be >= 1")


@dataclass(frozen=True)
class NormStats:
    """Min-max statistics fitted once on the training split."""

    vmin: float
    vmax: float

    def __post_init__(self):
        if not self.vmin <= self.vmax:
            raise ValueError("vmin must not exceed vmax")

    @classmethod
    def fit(cls, values) -> "NormStats":
        v = np.asarray(values, dtype=float)
        return cls(vmin=float(v.min()), vmax=float(v.max()))

    @property
    def span(self) -> float:
        return (self.vmax - self.vmin) or 1.0

    def normalize(self, values):
        return (np.asarray(values, dtype=float) - self.vmin) / self.span

    def denormalize(self, values):
        return np.asarray(values, dtype=float) * self.span + self.vmin


class LstmWeights:
    """All gate, peephole and output-layer tensors, keyed by name."""

    GATE_TENSORS = [f"{kind}_{gate}" for gate in _GATES for kind in ("W", "R", "b")]
    PEEPHOLES = ["p_i", "p_f", "p_o"]
    NAMES = GATE_TENSORS + PEEPHOLES + ["W_out", "b_out"]

    def __init__(self, arrays: dict[str, np.ndarray]):
        missing = set(self.NAMES) - set(arrays)
        if missing:
            raise ValueError(f"missing weight tensors: {sorted(missing)}")
        for name in self.NAMES:
            setattr(self, name, np.asarray(arrays[name], dtype=float))

    @classmethod
    def initialize(cls, n_units: int, horizon: int, rng: np.random.Generator,
                   ) -> "LstmWeights":
        # Uniform in [-1/sqrt(U), 1/sqrt(U)] for every tensor.
        bound = 1.0 / np.sqrt(n_units)

        def uniform(*shape):
            return rng.uniform(-bound, bound, size=shape)

        arrays = {}
        for gate in _GATES:
            arrays[f"W_{gate}"] = uniform(n_units)
            arrays[f"R_{gate}"] = uniform(n_units, n_units)
            arrays[f"b_{gate}"] = uniform(n_units)
        for name in cls.PEEPHOLES:
            arrays[name] = uniform(n_units)
        arrays["W_out"] = uniform(horizon, n_units)
        arrays["b_out"] = uniform(horizon)
        return cls(arrays)

    @property
    def n_units(self) -> int:
        return self.W_i.shape[0]

    @property
    def horizon(self) -> int:
        return self.W_out.shape[0]

    def as_dict(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.NAMES}

    def copy(self) -> "LstmWeights":
        return LstmWeights({name: arr.copy() for name, arr in self.as_dict().items()})

    def equals(self, other: "LstmWeights") -> bool:
        return all(np.array_equal(getattr(self, n), getattr(other, n))
                   for n in self.NAMES)


@dataclass(frozen=True)
class ForecastModel:
    weights: LstmWeights
    hyperparameters: Hyperparameters
    norm_stats: NormStats
    input_len: int = DEFAULT_INPUT_LEN
    horizon: int = DEFAULT_HORIZON
    rng_seed: int = 0
    version: int = 0


def new_model(hyperparameters: Hyperparameters, norm_stats: NormStats,
              input_len: int = DEFAULT_INPUT_LEN, horizon: int = DEFAULT_HORIZON,
              rng_seed: int = 0) -> ForecastModel:
    rng = np.random.default_rng([rng_seed, 1])
    weights = LstmWeights.initialize(hyperparameters.n_units, horizon, rng)
    return ForecastModel(weights=weights, hyperparameters=hyperparameters,
                         norm_stats=norm_stats, input_len=input_len,
                         horizon=horizon, rng_seed=rng_seed, version=0)


# --- supervised windows -------------------------------------------------------

@dataclass(frozen=True)
class SupervisedWindow:
    input: np.ndarray   # input_len consecutive normalized readings
    target: np.ndarray  # the next horizon normalized readings


def build_windows(series_segment, input_len: int = DEFAULT_INPUT_LEN,
                  horizon: int = DEFAULT_HORIZON, stride: int = 1,
                  ) -> list[SupervisedWindow]:
    """All maximal input/target windows over a contiguous segment."""
    if input_len < 1 or horizon < 1:
        raise ValueError("input_len and horizon must be >= 1")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    seg = np.asarray(series_segment, dtype=float).ravel()
    windows = []
    for start in range(0, seg.size - input_len - horizon + 1, stride):
        windows.append(SupervisedWindow(
            input=seg[start : start + input_len].copy(),
            target=seg[start + input_len : start + input_len + horizon].copy()))
    return windows


def stack_windows(windows: Sequence[SupervisedWindow]) -> tuple[np.ndarray, np.ndarray]:
    inputs = np.stack([w.input for w in windows])
    targets = np.stack([w.target for w in windows])
    return inputs, targets


# --- forward / backward -------------------------------------------------------

def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _forward(weights: LstmWeights, inputs: np.ndarray, keep_cache: bool):
    """Unroll the LSTM over (batch, steps) inputs.

    Gate order per step: block input z and input gate i (peephole on the
    previous cell state), forget gate f (peephole on the previous cell
    state), cell update, then output gate o peeping at the *updated* cell.
    """
    w = weights
    batch, steps = inputs.shape
    units = w.n_units
    h = np.zeros((batch, units))
    c = np.zeros((batch, units))
    cache = [] if keep_cache else None
    for t in range(steps):
        x_t = inputs[:, t][:, None]
        z = np.tanh(x_t * w.W_z + h @ w.R_z.T + w.b_z)
        i_g = _sigmoid(x_t * w.W_i + h @ w.R_i.T + c * w.p_i + w.b_i)
        f_g = _sigmoid(x_t * w.W_f + h @ w.R_f.T + c * w.p_f + w.b_f)
        c_new = z * i_g + c * f_g
        o_g = _sigmoid(x_t * w.W_o + h @ w.R_o.T + c_new * w.p_o + w.b_o)
        tanh_c = np.tanh(c_new)
        if keep_cache:
            cache.append((inputs[:, t], h, c, z, i_g, f_g, c_new, o_g, tanh_c))
        h = o_g * tanh_c
        c = c_new
    return h, cache


def batch_forward(weights: LstmWeights, inputs: np.ndarray,
                  dropout_mask: np.ndarray | None = None) -> np.ndarray:
    """Predictions (batch, horizon) in normalized space; no side effects."""
    h, _ = _forward(weights, inputs, keep_cache=False)
    if dropout_mask is not None:
        h = h * dropout_mask
    return h @ weights.W_out.T + weights.b_out


def loss_and_gradients(weights: LstmWeights, inputs: np.ndarray,
                       targets: np.ndarray,
                       dropout_mask: np.ndarray | None = None,
                       ) -> tuple[float, dict[str, np.ndarray]]:
    """MSE loss and its exact gradient for every weight tensor (full BPTT)."""
    w = weights
    batch, steps = inputs.shape
    h_final, cache = _forward(w, inputs, keep_cache=True)
    h_drop = h_final if dropout_mask is None else h_final * dropout_mask
    outputs = h_drop @ w.W_out.T + w.b_out
    diff = outputs - targets
    loss = float(np.mean(diff * diff))

    grads = {name: np.zeros_like(arr) for name, arr in w.as_dict().items()}
    d_out = 2.0 * diff / diff.size
    grads["W_out"] = d_out.T @ h_drop
    grads["b_out"] = d_out.sum(axis=0)
    dh = d_out @ w.W_out
    if dropout_mask is not None:
        dh = dh * dropout_mask
    dc_next = np.zeros((batch, w.n_units))

    for t in reversed(range(steps)):
        x_t, h_prev, c_prev, z, i_g, f_g, c_t, o_g, tanh_c = cache[t]
        do_pre = dh * tanh_c * o_g * (1.0 - o_g)
        dc = dh * o_g * (1.0 - tanh_c * tanh_c) + dc_next + do_pre * w.p_o
        dz_pre = dc * i_g * (1.0 - z * z)
        di_pre = dc * z * i_g * (1.0 - i_g)
        df_pre = dc * c_prev * f_g * (1.0 - f_g)
        dc_next = dc * f_g + di_pre * w.p_i + df_pre * w.p_f
        dh = dz_pre @ w.R_z + di_pre @ w.R_i + df_pre @ w.R_f + do_pre @ w.R_o

        x_col = x_t[:, None]
        for gate, d_pre in (("z", dz_pre), ("i", di_pre), ("f", df_pre), ("o", do_pre)):
            grads[f"W_{gate}"] += (d_pre * x_col).sum(axis=0)
            grads[f"R_{gate}"] += d_pre.T @ h_prev
            grads[f"b_{gate}"] += d_pre.sum(axis=0)
        grads["p_i"] += (di_pre * c_prev).sum(axis=0)
        grads["p_f"] += (df_pre * c_prev).sum(axis=0)
        grads["p_o"] += (do_pre * c_t).sum(axis=0)

    return loss, grads


def lstm_forward(model: ForecastModel, inputs) -> np.ndarray:
    """Deterministic inference on one normalized input window."""
    x = np.asarray(inputs, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("forecast input contains NaN or infinity")
    if x.size != model.input_len:
        raise ValueError(f"expected {model.input_len} input steps, got {x.size}")
    return batch_forward(model.weights, x[None, :])[0]


# --- training -------------------------------------------------------------

class _Adam:
    def __init__(self, weights: LstmWeights, learning_rate: float):
        self.lr = learning_rate
        self.step = 0
        self.m = {n: np.zeros_like(a) for n, a in weights.as_dict().items()}
        self.v = {n: np.zeros_like(a) for n, a in weights.as_dict().items()}

    def update(self, weights: LstmWeights, grads: dict[str, np.ndarray]) -> None:
        self.step += 1
        bias1 = 1.0 - _ADAM_BETA1 ** self.step
        bias2 = 1.0 - _ADAM_BETA2 ** self.step
        for name, grad in grads.items():
            m = self.m[name] = _ADAM_BETA1 * self.m[name] + (1 - _ADAM_BETA1) * grad
            v = self.v[name] = _ADAM_BETA2 * self.v[name] + (1 - _ADAM_BETA2) * grad * grad
            arr = getattr(weights, name)
            arr -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + _ADAM_EPS)


def _mse(weights: LstmWeights, inputs: np.ndarray, targets: np.ndarray) -> float:
    diff = batch_forward(weights, inputs) - targets
    return float(np.mean(diff * diff))


def _fit(weights: LstmWeights, inputs: np.ndarray, targets: np.ndarray,
         learning_rate: float, dropout_rate: float, epochs: int,
         batch_size: int, rng: np.random.Generator,
         val: tuple[np.ndarray, np.ndarray] | None, patience: int | None,
         ) -> LstmWeights:
    """Mini-batch Adam over a private weight copy; returns the best weights.

    "Best" means lowest validation loss when a validation set is given
    (with early stopping after `patience` stale epochs), otherwise the
    final weights.
    """
    work = weights.copy()
    adam = _Adam(work, learning_rate)
    n = inputs.shape[0]
    units = work.n_units

    best = work.copy() if val is not None else None
    best_loss = _mse(work, *val) if val is not None else np.inf
    stale = 0

    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch_idx = order[start : start + batch_size]
            mask = None
            if dropout_rate > 0.0:
                keep = rng.random((batch_idx.size, units)) >= dropout_rate
                mask = keep / (1.0 - dropout_rate)
            loss, grads = loss_and_gradients(work, inputs[batch_idx],
                                             targets[batch_idx], mask)
            if not np.isfinite(loss):
                raise DivergedLoss(f"training loss became {loss}")
            adam.update(work, grads)
        if val is not None:
            val_loss = _mse(work, *val)
            if not np.isfinite(val_loss):
                raise DivergedLoss(f"validation loss became {val_loss}")
            if val_loss < best_loss:
                best, best_loss, stale = work.copy(), val_loss, 0
            else:
                stale += 1
                if patience is not None and stale > patience:
                    break
    return best if best is not None else work


def train(model: ForecastModel, windows: Sequence[SupervisedWindow],
          val_windows: Sequence[SupervisedWindow], epochs: int,
          batch_size: int = DEFAULT_BATCH_SIZE,
          patience: int | None = DEFAULT_PATIENCE) -> ForecastModel:
    """Initial training run; keeps the best-validation weights seen."""
    if not windows:
        raise EmptyTrainingSet("no supervised windows to train on")
    inputs, targets = stack_windows(windows)
    val = stack_windows(val_windows) if val_windows else None
    rng = np.random.default_rng([model.rng_seed, 2, model.version])
    hp = model.hyperparameters
    weights = _fit(model.weights, inputs, targets, hp.learning_rate,
                   hp.dropout_rate, epochs, batch_size, rng, val, patience)
    return replace(model, weights=weights)


def incremental_update(model: ForecastModel,
                       new_windows: Sequence[SupervisedWindow],
                       tuned: Hyperparameters,
                       epochs: int = 10,
                       batch_size: int = DEFAULT_BATCH_SIZE) -> ForecastModel:
    """Continue training from the stored weights on new windows only.

    The unit count is structural and must match the model; only the tuned
    learning and dropout rates take effect. An empty batch is a no-op that
    returns the model unchanged (version included).
    """
    if not new_windows:
        return model
    if tuned.n_units != model.hyperparameters.n_units:
        raise ValueError("n_units is structural; incremental updates cannot change it")
    inputs, targets = stack_windows(new_windows)
    rng = np.random.default_rng([model.rng_seed, 2, model.version + 1])
    weights = _fit(model.weights, inputs, targets, tuned.learning_rate,
                   tuned.dropout_rate, epochs, batch_size, rng,
                   val=None, patience=None)
    hp = Hyperparameters(learning_rate=tuned.learning_rate,
                         dropout_rate=tuned.dropout_rate,
                         n_units=model.hyperparameters.n_units)
    return replace(model, weights=weights, hyperparameters=hp,
                   version=model.version + 1)


# --- day-level prediction ---------------------------------------------------

def predict_day(model: ForecastModel, day_context, day_readings) -> list[np.ndarray]:
    """24 hourly forecasts for one day, each model.horizon steps, in kWh.

    For each hour, the input is the `input_len` readings immediately
    preceding that hour (actual meter data, which at prediction time is
    the past), so no forecast ever sees anything at or after its own hour.
    """
    context = np.asarray(day_context, dtype=float).ravel()
    readings = np.asarray(day_readings, dtype=float).ravel()
    if readings.size % 24 != 0:
        raise ValueError(f"day length {readings.size} is not divisible into 24 hours")
    steps_per_hour = readings.size // 24
    if steps_per_hour != model.horizon:
        raise ValueError(f"model horizon {model.horizon} does not cover an hour "
                         f"of {steps_per_hour} readings")
    if context.size < model.input_len:
        raise InsufficientContext(f"need {model.input_len} context readings, "
                                  f"got {context.size}")
    if not (np.all(np.isfinite(context)) and np.all(np.isfinite(readings))):
        raise NonFiniteInput("context or day readings contain NaN or infinity")

    normalized = model.norm_stats.normalize(np.concatenate([context, readings]))
    rows = []
    for hour in range(24):
        end = context.size + hour * steps_per_hour
        rows.append(normalized[end - model.input_len : end])
    predictions = batch_forward(model.weights, np.stack(rows))
    return [model.norm_stats.denormalize(row) for row in predictions]


def seasonal_naive(day_context, readings_per_day: int) -> list[np.ndarray]:
    """Plumbing comparator: each hour repeats the same hour of yesterday."""
    context = np.asarray(day_context, dtype=float).ravel()
    if context.size < readings_per_day:
        raise InsufficientContext(f"need a full previous day ({readings_per_day} "
                                  f"readings), got {context.size}")
    if readings_per_day % 24 != 0:
        raise ValueError(f"readings_per_day {readings_per_day} is not divisible by 24")
    steps_per_hour = readings_per_day // 24
    previous_day = context[-readings_per_day:]
    return [previous_day[h * steps_per_hour : (h + 1) * steps_per_hour].copy()
            for h in range(24)]


# --- checkpointing ----------------------------------------------------------

_CHECKPOINT_VERSION = 1


def save_model(model: ForecastModel, path) -> None:
    """Dump all tensors plus metadata; round-trips bit-exactly."""
    meta = {
        "checkpoint_version": _CHECKPOINT_VERSION,
        "learning_rate": model.hyperparameters.learning_rate,
        "dropout_rate": model.hyperparameters.dropout_rate,
        "n_units": model.hyperparameters.n_units,
        "vmin": model.norm_stats.vmin,
        "vmax": model.norm_stats.vmax,
        "input_len": model.input_len,
        "horizon": model.horizon,
        "rng_seed": model.rng_seed,
        "version": model.version,
    }
    arrays = {f"weight_{name}": arr for name, arr in model.weights.as_dict().items()}
    np.savez(path, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
             **arrays)


def load_model(path) -> ForecastModel:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta["checkpoint_version"] != _CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['checkpoint_version']}")
        arrays = {name: data[f"weight_{name}"] for name in LstmWeights.NAMES}
    return ForecastModel(
        weights=LstmWeights(arrays),
        hyperparameters=Hyperparameters(learning_rate=meta["learning_rate"],
                                        dropout_rate=meta["dropout_rate"],
                                        n_units=meta["n_units"]),
        norm_stats=NormStats(vmin=meta["vmin"], vmax=meta["vmax"]),
        input_len=meta["input_len"],
        horizon=meta["horizon"],
        rng_seed=meta["rng_seed"],
        version=meta["version"],
    )
