"""Photon-number-resolving detector model, used as an independent oracle.

A twin-Fock component ``|m, m>`` sent through the interferometer produces
``n`` photons in the monitored output port with amplitude given by a rotation
matrix element ``d^m_{n-m, 0}`` evaluated at the phase shifted by the
beam-splitter quarter turn.  Summing squared elements over the source weights
gives the full photon-count distribution; summing its even entries must
reproduce the closed-form even-outcome probability from :mod:`.model`.  The
two paths share no formulas, which is what makes the check meaningful.

Rotation matrix elements are evaluated with a three-term recursion upward in
``j`` at fixed ``(mu, nu)``.  The factorial closed form is used only for the
minimal-``j`` seed, in log space; this stays accurate far past the j ~ 20
point where direct factorial evaluation degrades.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import HALF_PI, TmsvSource, twin_fock_weight

MAX_TRUNCATION_EPSILON = 1e-3
_MASS_TOL = 1e-9


@dataclass(frozen=True)
class PhotonCountDistribution:
    """Detector count distribution; ``pmf[n]`` is the probability of ``n`` photons.

    ``truncation_mass`` is the geometric tail mass provably excluded by the
    twin-Fock cutoff; it accounts for the deficit of ``pmf.sum()`` from 1.
    """

    pmf: np.ndarray
    truncation_mass: float

    def __post_init__(self) -> None:
        if np.any(self.pmf < 0.0):
            raise ValueError("probabilities must be nonnegative")
        total = float(self.pmf.sum()) + self.truncation_mass
        if abs(total - 1.0) > _MASS_TOL:
            raise ValueError(f"distribution mass {total} is not 1 within {_MASS_TOL}")

    def even_mass(self) -> float:
        return float(self.pmf[0::2].sum())

    def as_pairs(self) -> list[tuple[int, float]]:
        return [(n, float(p)) for n, p in enumerate(self.pmf)]


def _seed_top(j: int, nu: int, beta: float) -> float:
    # d^j_{j, nu}: single-term closed form, evaluated in log space.
    c = math.cos(beta / 2.0)
    s = math.sin(beta / 2.0)
    pc, ps = j + nu, j - nu
    if (c == 0.0 and pc > 0) or (s == 0.0 and ps > 0):
        return 0.0
    log_norm = 0.5 * (
        math.lgamma(2 * j + 1) - math.lgamma(pc + 1) - math.lgamma(ps + 1)
    )
    magnitude = math.exp(log_norm + pc * math.log(abs(c)) + ps * math.log(abs(s)))
    sign = -1.0 if ps % 2 else 1.0
    if c < 0.0 and pc % 2:
        sign = -sign
    if s < 0.0 and ps % 2:
        sign = -sign
    return sign * magnitude


def wigner_d(j: int, mu: int, nu: int, beta: float) -> float:
    """Rotation matrix element ``d^j_{mu, nu}(beta)``.

    Convention fixed so that ``d^j_{0,0}(beta)`` is the Legendre polynomial
    ``P_j(cos beta)``.  Only squared elements enter any observable here, so
    the convention cannot change physics; a test asserts as much.
    """
    for name, value in (("j", j), ("mu", mu), ("nu", nu)):
        if value != int(value):
            raise ValueError(f"{name} must be an integer, got {value!r}")
    j, mu, nu = int(j), int(mu), int(nu)
    if j < 0 or abs(mu) > j or abs(nu) > j:
        raise ValueError(f"indices out of range: j={j}, mu={mu}, nu={nu}")
    if not math.isfinite(beta):
        raise ValueError("beta must be finite")

    sign = 1.0
    if abs(mu) < abs(nu):  # d_{mu,nu} = (-1)^(mu-nu) d_{nu,mu}
        if (mu - nu) % 2:
            sign = -sign
        mu, nu = nu, mu
    if mu < 0:  # d_{-j0,nu} = (-1)^(j0+nu) d_{j0,-nu} at the seed order
        if (mu - nu) % 2:
            sign = -sign
        mu, nu = -mu, -nu

    j0 = mu  # mu >= |nu| >= 0 now holds
    x = math.cos(beta)
    if j0 == 0:
        if j == 0:
            return sign * 1.0
        prev, cur = 1.0, x
        start = 1
    else:
        prev, cur = 0.0, _seed_top(j0, nu, beta)
        start = j0
    for jj in range(start, j):
        num = (2 * jj + 1) * (jj * (jj + 1) * x - mu * nu) * cur
        num -= (jj + 1) * math.sqrt((jj * jj - mu * mu) * (jj * jj - nu * nu)) * prev
        den = jj * math.sqrt(
            ((jj + 1) ** 2 - mu * mu) * ((jj + 1) ** 2 - nu * nu)
        )
        prev, cur = cur, num / den
    return sign * cur


def _row_table(j_max: int, beta: float) -> np.ndarray:
    """All ``d^j_{mu,0}(beta)`` for ``j <= j_max``, column index ``mu + j_max``.

    Same recursion as :func:`wigner_d` run for every ``mu`` at once; the two
    outermost entries of each row come from the closed-form seed, which is
    multiplicative in ``j`` and needs no factorials.
    """
    size = 2 * j_max + 1
    table = np.zeros((j_max + 1, size))
    table[0, j_max] = 1.0
    x = math.cos(beta)
    half_sine = math.sin(beta) / 2.0
    mu = np.arange(-j_max, j_max + 1, dtype=float)
    seed = 1.0
    for j in range(1, j_max + 1):
        seed *= -half_sine * math.sqrt(2.0 * (2 * j - 1) / j)
        row = np.zeros(size)
        jj = j - 1
        lo, hi = j_max - jj, j_max + jj + 1  # interior |mu| <= j-1
        m = mu[lo:hi]
        num = (2 * jj + 1) * x * table[j - 1, lo:hi]
        if jj >= 1:
            num = num - np.sqrt(jj * jj - m * m) * table[j - 2, lo:hi]
        row[lo:hi] = num / np.sqrt((jj + 1) ** 2 - m * m)
        row[j_max + j] = seed
        row[j_max - j] = seed if j % 2 == 0 else -seed
        table[j] = row
    return table


def photon_count_distribution(
    source: TmsvSource, theta: float, epsilon: float = 1e-8
) -> PhotonCountDistribution:
    """Full detector count distribution, truncated to tail mass ``epsilon``.

    Twin-Fock components up to the geometric cutoff contribute; component
    ``m`` spreads over counts ``0..2m``, so the returned pmf covers twice the
    cutoff.  The ``m = ceil(n/2)`` boundary term is included: without it the
    distribution does not normalise.
    """
    if not 0.0 < epsilon <= MAX_TRUNCATION_EPSILON:
        raise ValueError(
            f"epsilon must be in (0, {MAX_TRUNCATION_EPSILON}], got {epsilon!r}"
        )
    if not math.isfinite(theta):
        raise ValueError("theta must be finite")
    cutoff = source.truncation_cutoff(epsilon)
    t = source.weight_ratio
    table = _row_table(cutoff, theta + HALF_PI)
    pmf = np.zeros(2 * cutoff + 1)
    for m in range(cutoff + 1):
        row = table[m, cutoff - m : cutoff + m + 1]  # mu = -m..m -> n = 0..2m
        pmf[: 2 * m + 1] += twin_fock_weight(source, m) * row * row
    return PhotonCountDistribution(pmf=pmf, truncation_mass=t ** (cutoff + 1))


def even_probability_via_fock(
    source: TmsvSource, theta: float, epsilon: float = 1e-8
) -> float:
    """Even-count probability summed from the detector distribution."""
    return photon_count_distribution(source, theta, epsilon).even_mass()
