"""Entropy, KL and Jensen-Shannon divergences between gridded densities.

The Jensen-Shannon divergence is computed in log base 2 so its value is
bounded in [0, 1]; its square root satisfies the triangle inequality and
is the distance the drift detector consumes. Two algebraically equivalent
formulations are kept: the mixture form (production path) and the entropy
form (numerical cross-check).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .density import DensityEstimate
from .errors import GridMismatch, UnnormalizedDensity

# Densities are floored here before entering a log denominator.
_Q_FLOOR = 1e-300

# Entropy refuses densities whose grid mass strays further than this from 1.
_MASS_TOLERANCE = 1e-2


@dataclass(frozen=True)
class DivergenceValue:
    value: float
    kind: str  # "jsd" or "sqrt_jsd"
    grid_id: str


def _require_same_grid(p: DensityEstimate, q: DensityEstimate) -> None:
    if p.grid != q.grid:
        raise GridMismatch(
            f"densities on different grids: {p.grid.key()} vs {q.grid.key()}"
        )


def shannon_entropy(p: DensityEstimate, base: float = 2.0) -> float:
    """Differential entropy -integral p log p, trapezoid rule, 0 log 0 = 0."""
    mass = p.mass()
    if abs(mass - 1.0) > _MASS_TOLERANCE:
        raise UnnormalizedDensity(f"density mass {mass:.4f} deviates from 1")
    d = p.density
    integrand = np.zeros_like(d)
    pos = d > 0
    integrand[pos] = -d[pos] * np.log(d[pos])
    return float(np.trapezoid(integrand, dx=p.grid.spacing)) / math.log(base)


def kl_divergence(p: DensityEstimate, q: DensityEstimate,
                  base: float = math.e) -> float:
    """Kullback-Leibler divergence integral p log(p/q); nats by default.

    The integrand is taken as 0 wherever p vanishes, and q is floored at
    1e-300 so an (exactly) zero q cannot blow up the log.
    """
    _require_same_grid(p, q)
    pd, qd = p.density, q.density
    integrand = np.zeros_like(pd)
    pos = pd > 0
    integrand[pos] = pd[pos] * np.log(pd[pos] / np.maximum(qd[pos], _Q_FLOOR))
    return float(np.trapezoid(integrand, dx=p.grid.spacing)) / math.log(base)


def jsd(p: DensityEstimate, q: DensityEstimate) -> DivergenceValue:
    """Jensen-Shannon divergence in bits (mixture form), clamped to [0, 1].

    0.5 * KL(p || m) + 0.5 * KL(q || m) with m = (p + q) / 2. The mixture
    is strictly positive wherever either argument is, so no epsilon enters
    the log. Swapping p and q sums the same two terms, so symmetry is
    exact in floating point.
    """
    _require_same_grid(p, q)
    m = 0.5 * (p.density + q.density)
    value = 0.5 * (_kl_bits_vs(p, m) + _kl_bits_vs(q, m))
    return DivergenceValue(value=min(max(value, 0.0), 1.0), kind="jsd",
                           grid_id=p.grid.key())


def _kl_bits_vs(p: DensityEstimate, m: np.ndarray) -> float:
    pd = p.density
    integrand = np.zeros_like(pd)
    pos = pd > 0
    integrand[pos] = pd[pos] * np.log2(pd[pos] / m[pos])
    return float(np.trapezoid(integrand, dx=p.grid.spacing))


def jsd_entropy(p: DensityEstimate, q: DensityEstimate) -> float:
    """Entropy form H(m) - (H(p) + H(q)) / 2 in bits; cross-check variant."""
    _require_same_grid(p, q)
    m = DensityEstimate(grid=p.grid, density=0.5 * (p.density + q.density),
                        bandwidth=p.bandwidth, n_samples=p.n_samples + q.n_samples)
    return shannon_entropy(m) - 0.5 * (shannon_entropy(p) + shannon_entropy(q))


def sqrt_jsd(p: DensityEstimate, q: DensityEstimate) -> DivergenceValue:
    """Square root of the JSD; a metric, used as the drift distance."""
    base = jsd(p, q)
    return DivergenceValue(value=math.sqrt(base.value), kind="sqrt_jsd",
                           grid_id=base.grid_id)
