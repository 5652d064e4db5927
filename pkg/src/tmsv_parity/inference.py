"""Bayesian phase inference on a discrete grid with a flat prior.

The estimation grid covers the open-left interval (0, pi/2], where the
posterior of a parity record has a single maximum.  Likelihoods are
precomputed once per source as log even/odd probabilities; a record's
posterior is then ``m * log_even + (M - m) * log_odd`` up to normalisation,
evaluated with max-subtraction so no record length can overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import HALF_PI, TmsvSource, even_probability, odd_probability
from .simulate import MeasurementRecord

DEFAULT_GRID_RESOLUTION = 16384

_NORMALISATION_TOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform estimation grid on (0, pi/2]; excludes 0, ends exactly at pi/2.

    Excluding the origin means a record with no odd outcomes estimates the
    first positive grid point rather than exactly zero, reproducing the
    sparse, discrete estimates seen near the origin.
    """

    points: np.ndarray
    resolution: int

    def __post_init__(self) -> None:
        pts = _readonly(self.points)
        object.__setattr__(self, "points", pts)
        if self.resolution < 2 or len(pts) != self.resolution:
            raise ValueError("resolution must match the number of grid points")
        if not (pts[0] > 0.0 and abs(pts[-1] - HALF_PI) < 1e-12):
            raise ValueError("grid must lie in (0, pi/2] and end at pi/2")
        steps = np.diff(pts)
        if np.any(steps <= 0.0) or np.ptp(steps) > 1e-12 * steps[0] + 1e-15:
            raise ValueError("grid must be strictly increasing and uniform")

    @classmethod
    def uniform(cls, resolution: int = DEFAULT_GRID_RESOLUTION) -> "PhaseGrid":
        pts = np.linspace(HALF_PI / resolution, HALF_PI, resolution)
        return cls(points=pts, resolution=resolution)

    @property
    def spacing(self) -> float:
        return HALF_PI / self.resolution


@dataclass(frozen=True)
class LikelihoodTable:
    """Log outcome probabilities tabulated on a grid, shareable across threads."""

    source: TmsvSource
    grid: PhaseGrid
    log_even: np.ndarray
    log_odd: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "log_even", _readonly(self.log_even))
        object.__setattr__(self, "log_odd", _readonly(self.log_odd))


@dataclass(frozen=True)
class Posterior:
    """Normalised posterior density over a phase grid (flat prior)."""

    grid: PhaseGrid
    density: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "density", _readonly(self.density))
        total = float(self.density.sum()) * self.grid.spacing
        if abs(total - 1.0) > _NORMALISATION_TOL:
            raise ValueError(f"posterior mass {total} not normalised")


@dataclass(frozen=True)
class PhaseEstimate:
    value: float
    grid_index: int


def build_likelihood_table(source: TmsvSource, grid: PhaseGrid) -> LikelihoodTable:
    """Tabulate log even/odd probabilities on the grid.

    The odd probability is evaluated in its cancellation-free form, so
    ``log_odd`` stays finite and accurate arbitrarily close to the origin.
    """
    pts = grid.points
    log_even = np.log(even_probability(source, pts))
    log_odd = np.log(odd_probability(source, pts))
    return LikelihoodTable(source=source, grid=grid, log_even=log_even, log_odd=log_odd)


def log_posterior(record: MeasurementRecord, table: LikelihoodTable) -> np.ndarray:
    """Unnormalised log posterior of a record over the table's grid."""
    m = float(record.even_count)
    return m * table.log_even + (record.record_length - m) * table.log_odd


def posterior(record: MeasurementRecord, table: LikelihoodTable) -> Posterior:
    """Posterior density of a record, normalised on the grid."""
    logp = log_posterior(record, table)
    weights = np.exp(logp - logp.max())
    density = weights / (weights.sum() * table.grid.spacing)
    return Posterior(grid=table.grid, density=density)


def map_estimate(post: Posterior) -> PhaseEstimate:
    """Grid point of maximum posterior density; ties break to the smaller phase."""
    idx = int(np.argmax(post.density))
    return PhaseEstimate(value=float(post.grid.points[idx]), grid_index=idx)


def map_estimate_for_record(
    record: MeasurementRecord, table: LikelihoodTable
) -> PhaseEstimate:
    """MAP estimate without materialising the density (same argmax)."""
    idx = int(np.argmax(log_posterior(record, table)))
    return PhaseEstimate(value=float(table.grid.points[idx]), grid_index=idx)


def map_indices_for_counts(
    even_counts: np.ndarray,
    record_length: int,
    table: LikelihoodTable,
    block: int = 64,
) -> np.ndarray:
    """Grid argmax for many records of one length, vectorised over counts.

    The argmax depends on a record only through its even count, so callers
    pass unique counts and fan the result back out; each block costs one pass
    of ``m * log_even + (M - m) * log_odd`` over the grid.
    """
    counts = np.asarray(even_counts, dtype=float)
    base = record_length * table.log_odd
    diff = table.log_even - table.log_odd
    out = np.empty(len(counts), dtype=np.int64)
    for lo in range(0, len(counts), block):
        chunk = counts[lo : lo + block, None]
        out[lo : lo + block] = np.argmax(base[None, :] + chunk * diff[None, :], axis=1)
    return out


def credible_interval(post: Posterior, mass: float) -> tuple[float, float]:
    """Shortest contiguous grid interval holding at least ``mass`` posterior mass."""
    if not 0.0 < mass < 1.0:
        raise ValueError("mass must lie strictly between 0 and 1")
    dens = post.density
    n = len(dens)
    cum = np.empty(n + 1)
    cum[0] = 0.0
    np.cumsum(dens, out=cum[1:])
    cum[1:] *= post.grid.spacing
    target = min(mass, float(cum[-1]))

    best_lo, best_hi = 0, n - 1
    hi = 0
    for lo in range(n):
        if hi < lo:
            hi = lo
        while hi < n - 1 and cum[hi + 1] - cum[lo] < target:
            hi += 1
        if cum[hi + 1] - cum[lo] < target:
            break  # no window starting at or after lo can reach the mass
        if hi - lo < best_hi - best_lo:
            best_lo, best_hi = lo, hi
    pts = post.grid.points
    return float(pts[best_lo]), float(pts[best_hi])
