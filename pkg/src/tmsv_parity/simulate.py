"""Deterministic generation of parity measurement records and running-parity
convergence traces.

A record is the count of even outcomes among M independent detections, which
is all the likelihood ever needs.  Records can be drawn two ways:

* ``method="binomial"``: one uniform is inverted through the binomial CDF,
  enumerated outward from the mode so the table stays short for any M.
* ``method="stream"``: M Bernoulli draws, one uniform each; this is the path
  a convergence trace uses, so the final trace entry matches the stream
  record for the same seed by construction.

Both paths are driven by the counter-based generator in :mod:`.rng`; a given
(config, method) always reproduces the same record, independent of how many
records are drawn around it or on which thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import rng
from .model import HALF_PI, TmsvSource, even_probability, odd_probability
from .rng import derive_seed, derive_seeds

__all__ = [
    "RecordConfig",
    "MeasurementRecord",
    "ConvergenceTrace",
    "draw_record",
    "draw_even_counts",
    "parity_trace",
    "derive_seed",
    "derive_seeds",
]

# Sampling table entries below pmf(mode) * _TABLE_CUTOFF are dropped; the
# residual maps to the last enumerated count and carries ~1e-30 probability.
_TABLE_CUTOFF = 1e-34


@dataclass(frozen=True)
class RecordConfig:
    """Inputs that fully determine one measurement record."""

    theta_true: float
    source: TmsvSource
    record_length: int
    seed: int

    def __post_init__(self) -> None:
        if self.record_length < 1 or self.record_length != int(self.record_length):
            raise ValueError("record_length must be a positive integer")
        if not math.isfinite(self.theta_true) or not 0.0 <= self.theta_true <= HALF_PI:
            raise ValueError("theta_true must lie in [0, pi/2]")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class MeasurementRecord:
    """Count of even parity outcomes among ``record_length`` detections."""

    even_count: int
    record_length: int

    def __post_init__(self) -> None:
        if self.record_length < 1:
            raise ValueError("record_length must be positive")
        if not 0 <= self.even_count <= self.record_length:
            raise ValueError("even_count must lie in [0, record_length]")

    @property
    def parity(self) -> float:
        """Inferred parity signal, ``(2m - M)/M``."""
        return (2.0 * self.even_count - self.record_length) / self.record_length


@dataclass(frozen=True)
class ConvergenceTrace:
    """Running parity estimate after each detection of one record."""

    running_parity: np.ndarray

    @property
    def final(self) -> float:
        return float(self.running_parity[-1])


@lru_cache(maxsize=256)
def _inversion_table(record_length: int, p_even: float, p_odd: float):
    """Outcome codes and cumulative masses for binomial inversion.

    Counts are enumerated zigzag from the mode, extending each side until its
    pmf falls below ``pmf(mode) * _TABLE_CUTOFF``, so the table length scales
    with the binomial standard deviation rather than with M.
    """
    m_len = record_length
    if p_odd <= 0.0 or p_even >= 1.0:
        return np.array([m_len]), np.array([1.0])
    if p_even <= 0.0:
        return np.array([0]), np.array([1.0])
    mode = min(m_len, int((m_len + 1) * p_even))
    log_mode = (
        math.lgamma(m_len + 1)
        - math.lgamma(mode + 1)
        - math.lgamma(m_len - mode + 1)
        + mode * math.log(p_even)
        + (m_len - mode) * math.log(p_odd)
    )
    pmf_mode = math.exp(log_mode)
    floor = pmf_mode * _TABLE_CUTOFF
    up_ratio = p_even / p_odd

    codes = [mode]
    masses = [pmf_mode]
    hi, lo = mode, mode
    pmf_hi, pmf_lo = pmf_mode, pmf_mode
    while True:
        stepped = False
        if hi < m_len and pmf_hi >= floor:
            pmf_hi *= (m_len - hi) / (hi + 1) * up_ratio
            hi += 1
            if pmf_hi >= floor:
                codes.append(hi)
                masses.append(pmf_hi)
                stepped = True
        if lo > 0 and pmf_lo >= floor:
            pmf_lo *= lo / (m_len - lo + 1) / up_ratio
            lo -= 1
            if pmf_lo >= floor:
                codes.append(lo)
                masses.append(pmf_lo)
                stepped = True
        if not stepped:
            break
    return np.array(codes), np.cumsum(masses)


def _counts_from_uniforms(
    uniforms: np.ndarray, record_length: int, p_even: float, p_odd: float
) -> np.ndarray:
    codes, cum = _inversion_table(record_length, float(p_even), float(p_odd))
    idx = np.minimum(np.searchsorted(cum, uniforms, side="right"), len(codes) - 1)
    return codes[idx]


def _probabilities(config: RecordConfig, p_even: float | None) -> tuple[float, float]:
    if p_even is not None:  # test hook: inject an outcome probability directly
        if not 0.0 <= p_even <= 1.0:
            raise ValueError("p_even must lie in [0, 1]")
        return p_even, 1.0 - p_even
    return (
        even_probability(config.source, config.theta_true),
        odd_probability(config.source, config.theta_true),
    )


def draw_record(
    config: RecordConfig,
    *,
    method: str = "binomial",
    p_even: float | None = None,
) -> MeasurementRecord:
    """Draw one measurement record.

    ``method="binomial"`` consumes a single uniform; ``method="stream"``
    consumes one uniform per detection and equals the record implied by
    :func:`parity_trace` for the same config.  The two methods agree in
    distribution, not draw by draw.
    """
    pe, po = _probabilities(config, p_even)
    if method == "binomial":
        u = rng.first_uniforms(np.array([config.seed], dtype=np.uint64))
        count = int(_counts_from_uniforms(u, config.record_length, pe, po)[0])
    elif method == "stream":
        u = rng.stream_uniforms(config.seed, config.record_length)
        count = int(np.count_nonzero(u < pe))
    else:
        raise ValueError(f"unknown method {method!r}")
    return MeasurementRecord(even_count=count, record_length=config.record_length)


def draw_even_counts(
    p_even: float, p_odd: float, record_length: int, seeds: np.ndarray
) -> np.ndarray:
    """Vectorised binomial path: one even-count per seed.

    Record ``i`` consumes the first uniform of the stream seeded by
    ``seeds[i]``, exactly as the scalar binomial path does, so ensemble
    results match record-by-record draws bit for bit.
    """
    return _counts_from_uniforms(
        rng.first_uniforms(seeds), record_length, p_even, p_odd
    )


def parity_trace(config: RecordConfig, *, p_even: float | None = None) -> ConvergenceTrace:
    """Running parity estimate after each of the M detections."""
    pe, _ = _probabilities(config, p_even)
    u = rng.stream_uniforms(config.seed, config.record_length)
    outcomes = np.where(u < pe, 1.0, -1.0)
    running = np.cumsum(outcomes) / np.arange(1, config.record_length + 1)
    return ConvergenceTrace(running_parity=running)
