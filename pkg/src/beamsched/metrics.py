"""Campaign statistics: outage CDFs, Jain fairness, complexity estimators."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


def outage_probability(samples, r):
    """Empirical P{min rate <= r} over per-slot minimum-rate samples."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ConfigError("no samples")
    return float(np.mean(samples <= r))


def outage_curve(samples, grid):
    """Step-CDF values of the samples on a threshold grid (no smoothing)."""
    samples = np.sort(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise ConfigError("no samples")
    grid = np.asarray(grid, dtype=float)
    return np.searchsorted(samples, grid, side="right") / samples.size


def jain_index(rates):
    """Jain's fairness index (sum x)^2 / (n sum x^2), in [1/n, 1]."""
    rates = np.asarray(rates, dtype=float)
    if rates.size == 0:
        raise ConfigError("Jain index of an empty rate vector")
    if np.any(rates < 0.0):
        raise ConfigError("Jain index needs non-negative rates")
    denom = rates.size * float(np.sum(rates**2))
    if denom == 0.0:
        raise ConfigError("Jain index undefined for an all-zero rate vector")
    return float(np.sum(rates)) ** 2 / denom


def complexity_estimate(m, c=3):
    """Per-slot complexity scale of one schedule without FSA: M^4 (C-1) / M."""
    if m < 1:
        raise ConfigError("depth must be >= 1")
    return m**4 * (c - 1) / m


def complexity_fsa(freqs, m_fsa, c=3):
    """Average per-slot complexity of the adaptive FSA scheduler.

    freqs[i] is the slot share of class M=i+1 (the last entry is the FSA
    share at m_fsa+1 slots). Frequencies are renormalized to sum to one
    before applying the estimate; each class term accumulates the cost of
    all tries up to its depth.
    """
    freqs = np.asarray(freqs, dtype=float)
    if len(freqs) != m_fsa + 1:
        raise ConfigError(f"need {m_fsa + 1} frequencies, got {len(freqs)}")
    if np.any(freqs < 0.0) or freqs.sum() <= 0.0:
        raise ConfigError("frequencies must be non-negative and not all zero")
    if freqs.sum() > 1.0 + 1e-6:
        raise ConfigError("frequencies must sum to at most 1")
    f = freqs / freqs.sum()
    tries = np.cumsum([(c - 1) * j**4 for j in range(1, m_fsa + 2)])
    total = sum(f[i - 1] / i * tries[i - 1] for i in range(1, m_fsa + 1))
    total += f[m_fsa] / m_fsa * tries[m_fsa]
    return float(total)


def complexity_gain(freqs, m_fsa, c=3, reference_m=None):
    """Relative complexity saved by the FSA policy vs a fixed-depth run."""
    reference_m = m_fsa if reference_m is None else reference_m
    return 1.0 - complexity_fsa(freqs, m_fsa, c) / complexity_estimate(reference_m, c)


@dataclass
class CampaignStats:
    """Aggregated per-slot statistics of one campaign arm."""

    label: str
    min_rate_samples: np.ndarray
    jain_samples: np.ndarray
    n_sched: int
    complexity: dict = field(default_factory=dict)
    n_evaluations: int = 0

    def outage(self, r):
        return outage_probability(self.min_rate_samples, r)

    def curve(self, grid):
        return outage_curve(self.min_rate_samples, grid)

    def jain_curve(self, grid):
        return outage_curve(self.jain_samples, grid)

    def quantile(self, p):
        return float(np.quantile(self.min_rate_samples, p))
