"""Dynamic change-point detector over daily divergence values.

Each day's sqrt-JSD distance between that day's KDE and the KDE of all
preceding readings is tested against the distribution of past divergence
values: the p-value is the upper-tail mass of a KDE fitted to the history,
and a drift fires when it drops below the significance level tau. No fixed
divergence threshold is ever set; the history distribution evolves as every
day (drift or not) appends its divergence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from datetime import date
from typing import Sequence

import numpy as np

from .density import (
    DEFAULT_GRID_POINTS,
    Grid,
    estimate_kde,
    shared_grid,
    silverman_bandwidth,
)
from .divergence import sqrt_jsd
from .errors import EmptyHistory, InsufficientHistory, OutOfRangeDivergence
from .ingest import DaySample

# Divergences live on [0, 1]; the history KDE is integrated on this domain
# padded by 5 history bandwidths.
_HISTORY_DOMAIN = (0.0, 1.0)

# Below this many recorded divergences the optional empirical-rank fallback
# takes over (when enabled).
RANK_FALLBACK_MAX_HISTORY = 10


@dataclass(frozen=True)
class DriftState:
    """Reference readings pool plus the evolving divergence history."""

    reference_readings: np.ndarray
    divergence_history: np.ndarray
    load_bandwidth: float
    grid_points: int = DEFAULT_GRID_POINTS
    use_rank_fallback: bool = False

    @property
    def history_bandwidth(self) -> float:
        """Silverman bandwidth over the current divergence history."""
        return silverman_bandwidth(self.divergence_history)


@dataclass(frozen=True)
class DriftDecision:
    day_index: date
    divergence: float
    p_value: float
    is_drift: bool
    tau: float


def init_drift_state(train_days: Sequence[DaySample], load_bandwidth: float,
                     grid_points: int = DEFAULT_GRID_POINTS,
                     use_rank_fallback: bool = False) -> DriftState:
    """Seed the detector from d training days.

    Produces d-1 divergence values: day k against the pooled readings of
    days 1..k-1, the same comparison the live detector performs.
    """
    if len(train_days) < 2:
        raise InsufficientHistory(f"need at least 2 training days, got {len(train_days)}")

    all_readings = np.concatenate([day.readings for day in train_days])
    rpd = train_days[0].readings.size
    history = np.empty(len(train_days) - 1)
    for k in range(1, len(train_days)):
        pool = all_readings[: k * rpd]
        day = train_days[k].readings
        grid = shared_grid(day, pool, load_bandwidth, grid_points)
        div = sqrt_jsd(estimate_kde(day, load_bandwidth, grid),
                       estimate_kde(pool, load_bandwidth, grid))
        history[k - 1] = div.value

    return DriftState(reference_readings=all_readings,
                      divergence_history=history,
                      load_bandwidth=load_bandwidth,
                      grid_points=grid_points,
                      use_rank_fallback=use_rank_fallback)


def compute_divergence(state: DriftState, new_day: DaySample) -> float:
    """sqrt-JSD between the new day and the full reference pool."""
    grid = shared_grid(new_day.readings, state.reference_readings,
                       state.load_bandwidth, state.grid_points)
    div = sqrt_jsd(estimate_kde(new_day.readings, state.load_bandwidth, grid),
                   estimate_kde(state.reference_readings, state.load_bandwidth, grid))
    return div.value


def tail_mass(history, probe: float, bandwidth: float,
              domain: tuple[float, float] = _HISTORY_DOMAIN,
              n_points: int = DEFAULT_GRID_POINTS) -> float:
    """Upper-tail mass of the history KDE at `probe`, clamped to [0, 1].

    Trapezoid rule on the padded domain grid, with the cut cell handled by
    linear interpolation of the density at the probe.
    """
    values = np.asarray(history, dtype=float).ravel()
    if values.size == 0:
        raise EmptyHistory("no divergence history recorded yet")
    lo = domain[0] - 5.0 * bandwidth
    hi = domain[1] + 5.0 * bandwidth
    grid = Grid(lo=lo, hi=hi, n_points=n_points)
    dens = estimate_kde(values, bandwidth, grid).density
    pts = grid.points

    if probe <= lo:
        mass = float(np.trapezoid(dens, pts))
    elif probe >= hi:
        mass = 0.0
    else:
        k = int(np.searchsorted(pts, probe, side="left"))
        mass = float(np.trapezoid(dens[k:], pts[k:])) if k < len(pts) else 0.0
        if k > 0 and k < len(pts):
            d_probe = float(np.interp(probe, pts, dens))
            mass += 0.5 * (d_probe + dens[k]) * float(pts[k] - probe)
    return float(min(max(mass, 0.0), 1.0))


# The true upper-tail probability is strictly below 1 for any finite probe
# (every Gaussian kernel keeps some mass underneath it), but at double
# precision it can round to exactly 1.0, which would defeat the tau=1
# always-adapt equivalence. Cap at the largest double below 1 instead.
_P_CAP = math.nextafter(1.0, 0.0)


def p_value(state: DriftState, divergence: float) -> float:
    """Right-tail p-value: how extreme the divergence is against history."""
    history = state.divergence_history
    if history.size == 0:
        raise EmptyHistory("no divergence history recorded yet")
    if state.use_rank_fallback and history.size < RANK_FALLBACK_MAX_HISTORY:
        p = float((np.sum(history > divergence) + 1) / (history.size + 1))
    else:
        p = tail_mass(history, divergence, state.history_bandwidth,
                      n_points=state.grid_points)
    return min(p, _P_CAP)


def decide(state: DriftState, new_day: DaySample, tau: float) -> DriftDecision:
    """Full test for one day: divergence, p-value, drift flag."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    div = compute_divergence(state, new_day)
    p = p_value(state, div)
    return DriftDecision(day_index=new_day.day, divergence=float(div),
                         p_value=float(p), is_drift=bool(p < tau), tau=float(tau))


def advance(state: DriftState, new_day: DaySample, divergence: float) -> DriftState:
    """Append the day to the reference pool and its divergence to history.

    Runs on every day, drift or not: the history distribution must keep
    evolving or the test never adapts to the stream's own variability.
    """
    if not 0.0 <= divergence <= 1.0:
        raise OutOfRangeDivergence(f"divergence {divergence} outside [0, 1]")
    return replace(state,
                   reference_readings=np.concatenate([state.reference_readings,
                                                      new_day.readings]),
                   divergence_history=np.append(state.divergence_history, divergence))
