"""Closed-form statistics of parity readout for a two-mode squeezed-vacuum
interferometer.

The source is characterised by its mean photon number ``nbar``; the
interferometer imprints a phase ``theta``.  The parity signal, the even/odd
outcome probabilities and the sensitivity baselines (Cramer-Rao, shot noise,
Heisenberg) are all elementary functions of ``nbar*(nbar+2)*sin(theta)**2``.

Phase arguments accept scalars or numpy arrays and broadcast; every function
is pure.  No angle wrapping is performed: callers restrict domains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

HALF_PI = math.pi / 2.0

# |cos(theta)| below this counts as the divergent bound at theta = pi/2.
COS_SINGULARITY_TOL = 1e-12

# Below this |theta| the single-shot variance switches to its analytic limit
# to avoid a 0/0 ratio.
SMALL_PHASE_TOL = 1e-8


class SingularBoundError(ValueError):
    """The Cramer-Rao expression diverges at this phase (cos(theta) = 0)."""


@dataclass(frozen=True)
class TmsvSource:
    """Two-mode squeezed-vacuum source with mean photon number ``mean_photons``."""

    mean_photons: float

    def __post_init__(self) -> None:
        n = self.mean_photons
        if not isinstance(n, (int, float)) or not math.isfinite(n) or n <= 0:
            raise ValueError(f"mean_photons must be finite and positive, got {n!r}")

    @property
    def weight_ratio(self) -> float:
        """Geometric ratio of consecutive twin-Fock weights, strictly in (0, 1)."""
        return 1.0 / (1.0 + 2.0 / self.mean_photons)

    @property
    def fringe_coefficient(self) -> float:
        """``nbar*(nbar+2)``, the curvature of the parity fringe."""
        return self.mean_photons * (self.mean_photons + 2.0)

    def truncation_cutoff(self, epsilon: float) -> int:
        """Smallest twin-Fock index whose geometric tail mass is below ``epsilon``."""
        if not 0.0 < epsilon < 1.0:
            raise ValueError("epsilon must be in (0, 1)")
        return max(1, math.ceil(math.log(epsilon) / math.log(self.weight_ratio)))


@dataclass(frozen=True)
class SensitivityBounds:
    """Proportionality constants multiplying 1/sqrt(M), in radians."""

    crb_c: float
    shot_noise_c: float
    heisenberg_c: float


def _as_phase(theta) -> np.ndarray:
    arr = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("phase must be finite")
    return arr


def _match(theta, value: np.ndarray):
    return float(value) if np.ndim(theta) == 0 else value


def twin_fock_weight(source: TmsvSource, n: int) -> float:
    """Probability of the n-th twin-Fock component, ``(1-t) * t**n``."""
    if n < 0 or n != int(n):
        raise ValueError("n must be a nonnegative integer")
    t = source.weight_ratio
    return (1.0 - t) * t ** int(n)


def parity_expectation(source: TmsvSource, theta):
    """Expected parity signal, ``1/sqrt(1 + nbar*(nbar+2)*sin(theta)**2)``.

    Lies in (0, 1], is even in theta and pi-periodic, and decreases
    monotonically on [0, pi/2].
    """
    th = _as_phase(theta)
    w = source.fringe_coefficient * np.sin(th) ** 2
    return _match(theta, 1.0 / np.sqrt(1.0 + w))


def parity_derivative(source: TmsvSource, theta):
    """Analytic d/dtheta of :func:`parity_expectation`."""
    th = _as_phase(theta)
    k = source.fringe_coefficient
    w = k * np.sin(th) ** 2
    return _match(theta, -k * np.sin(th) * np.cos(th) * (1.0 + w) ** -1.5)


def even_probability(source: TmsvSource, theta):
    """Probability that one detection yields an even photon count."""
    return _match(theta, 0.5 * (1.0 + parity_expectation(source, _as_phase(theta))))


def odd_probability(source: TmsvSource, theta):
    """Probability of an odd count, computed without cancellation.

    Uses ``(1 - p)/2`` rewritten as ``w / (2r(1+r))`` with ``r = sqrt(1+w)``,
    which stays accurate when the parity signal is within 1e-16 of 1.
    """
    th = _as_phase(theta)
    w = source.fringe_coefficient * np.sin(th) ** 2
    r = np.sqrt(1.0 + w)
    return _match(theta, w / (2.0 * r * (1.0 + r)))


def single_shot_variance(source: TmsvSource, theta):
    """Phase variance of a single parity measurement.

    The ratio of the parity variance ``1 - <parity>**2`` to the squared slope
    of the parity signal.  Below ``SMALL_PHASE_TOL`` the analytic limit
    ``1/(nbar*(nbar+2))`` is returned, avoiding the 0/0 at the origin.
    """
    th = _as_phase(theta)
    k = source.fringe_coefficient
    w = k * np.sin(th) ** 2
    variance = w / (1.0 + w)  # 1 - <parity>^2, cancellation-free
    slope = parity_derivative(source, th)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = variance / slope**2
    out = np.where(np.abs(th) < SMALL_PHASE_TOL, 1.0 / k, ratio)
    return _match(theta, out)


def crb_sensitivity(source: TmsvSource, theta, record_length: int):
    """Cramer-Rao phase sensitivity after ``record_length`` parity detections.

    Raises :class:`SingularBoundError` where the bound diverges instead of
    returning an infinity, so tabulators can skip the point.
    """
    if record_length < 1 or record_length != int(record_length):
        raise ValueError("record_length must be a positive integer")
    th = _as_phase(theta)
    c = np.cos(th)
    if np.any(np.abs(c) < COS_SINGULARITY_TOL):
        raise SingularBoundError("sensitivity bound diverges at theta = pi/2")
    k = source.fringe_coefficient
    w = k * np.sin(th) ** 2
    return _match(theta, (1.0 + w) / (np.sqrt(record_length * k) * np.abs(c)))


def shot_noise_c(source: TmsvSource) -> float:
    """Shot-noise constant ``1/sqrt(nbar)`` multiplying 1/sqrt(M)."""
    return 1.0 / math.sqrt(source.mean_photons)


def heisenberg_c(source: TmsvSource) -> float:
    """Heisenberg constant ``1/nbar`` multiplying 1/sqrt(M)."""
    return 1.0 / source.mean_photons


def sensitivity_bounds(source: TmsvSource, theta: float) -> SensitivityBounds:
    """All three 1/sqrt(M) constants at one phase (CRB taken at M = 1)."""
    return SensitivityBounds(
        crb_c=crb_sensitivity(source, theta, 1),
        shot_noise_c=shot_noise_c(source),
        heisenberg_c=heisenberg_c(source),
    )
