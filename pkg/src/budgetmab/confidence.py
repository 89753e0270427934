"""Asymmetric confidence intervals for bounded random variables.

The interval generalizes Wilson's score interval from Bernoulli proportions
to any random variable supported on ``[lo, hi]``.  The variance enters only
through the ratio ``eta = var / ((hi - mean) * (mean - lo))``, which the
Bhatia-Davis inequality confines to ``[0, 1]``; ``eta = 1`` is the
two-point (Bernoulli-like) worst case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DISCRIMINANT_TOL = 1e-12


class InvalidQueryError(ValueError):
    """Raised when an interval query violates its preconditions."""


@dataclass(frozen=True)
class IntervalQuery:
    n: int
    mean: float
    z: float
    eta: float = 1.0
    lo: float = 0.0
    hi: float = 1.0

    def validate(self) -> None:
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise InvalidQueryError(f"n must be a positive integer, got {self.n!r}")
        if not self.hi > self.lo:
            raise InvalidQueryError(f"need hi > lo, got [{self.lo}, {self.hi}]")
        if not self.lo <= self.mean <= self.hi:
            raise InvalidQueryError(f"mean {self.mean} outside [{self.lo}, {self.hi}]")
        if not 0.0 <= self.eta <= 1.0:
            raise InvalidQueryError(f"eta must lie in [0, 1], got {self.eta}")
        if not (self.z >= 0.0 and math.isfinite(self.z)):
            raise InvalidQueryError(f"z must be finite and >= 0, got {self.z}")


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)


def _center_and_discriminant(n, mean, z2eta, lo, hi):
    """Return ``B/(2A)`` and ``B^2/(4A^2) - C/A`` for the interval quadratic.

    The discriminant is expanded as
    ``(z2eta * n * (hi - mean) * (mean - lo) + z2eta^2 * (hi - lo)^2 / 4) / A^2``,
    which is algebraically identical to the textbook form but free of the
    cancellation between ``B^2/(4A^2)`` and ``C/A``.
    """
    a = n + z2eta
    center = (n * mean + 0.5 * z2eta * (hi + lo)) / a
    spread = (hi - mean) * (mean - lo)
    disc = (z2eta * n * spread + 0.25 * z2eta * z2eta * (hi - lo) ** 2) / (a * a)
    return center, disc


def wilson_bounds(n, mean, z, eta=1.0, lo=0.0, hi=1.0):
    """Vectorized interval endpoints without argument validation.

    All arguments broadcast against each other.  Used on the hot path of the
    policies, where inputs are guaranteed valid by construction.

    Returns:
        Tuple ``(lower, upper)`` of arrays (or floats for scalar input).
    """
    n = np.asarray(n, dtype=float)
    mean = np.asarray(mean, dtype=float)
    z2eta = np.asarray(z, dtype=float) ** 2 * np.asarray(eta, dtype=float)
    center, disc = _center_and_discriminant(n, mean, z2eta, lo, hi)
    half = np.sqrt(np.maximum(disc, 0.0))
    # np.clip is avoided: its wrapper dominates the cost for small arrays
    lower = np.minimum(np.maximum(center - half, lo), mean)
    upper = np.maximum(np.minimum(center + half, hi), mean)
    return lower, upper


def wilson_interval(q: IntervalQuery) -> Interval:
    """Confidence interval ``[omega_-, omega_+]`` for the mean of ``q``.

    Raises:
        InvalidQueryError: if ``q`` violates its preconditions, or if the
            discriminant is negative beyond floating-point noise.
    """
    q.validate()
    center, disc = _center_and_discriminant(
        float(q.n), float(q.mean), q.z * q.z * q.eta, q.lo, q.hi
    )
    if disc < 0.0:
        if disc < -DISCRIMINANT_TOL:
            raise InvalidQueryError(f"negative discriminant {disc!r} for {q}")
        disc = 0.0
    half = math.sqrt(disc)
    lower = min(max(center - half, q.lo), q.hi, q.mean)
    upper = max(min(center + half, q.hi), q.lo, q.mean)
    return Interval(lower, upper)


def z_of_t(rho: float, t: int) -> float:
    """Time-adaptive deviation multiplier ``sqrt(2 * rho * ln t)``."""
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if rho <= 0:
        raise ValueError(f"rho must be > 0, got {rho}")
    return math.sqrt(2.0 * rho * math.log(t))


def alpha_ceiling(rho: float, t: int) -> float:
    """Upper limit ``1 - sqrt(1 - t^-rho)`` on the per-round failure probability."""
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if rho <= 0:
        raise ValueError(f"rho must be > 0, got {rho}")
    x = float(t) ** (-rho)
    # 1 - sqrt(1 - x) rewritten to avoid cancellation for small x
    return x / (1.0 + math.sqrt(1.0 - x))


def eta_estimate(mean: float, variance: float, lo: float = 0.0, hi: float = 1.0) -> float:
    """Plug-in variance ratio, clamped to ``[0, 1]``.

    A sample mean on the boundary of the support returns 1: the data cannot
    rule out a two-point distribution with expectation just inside the
    boundary.
    """
    if variance < 0:
        raise ValueError(f"variance must be >= 0, got {variance}")
    if not hi > lo:
        raise ValueError(f"need hi > lo, got [{lo}, {hi}]")
    if not lo <= mean <= hi:
        raise ValueError(f"mean {mean} outside [{lo}, {hi}]")
    spread = (hi - mean) * (mean - lo)
    if spread <= 0.0:
        return 1.0
    return min(max(variance / spread, 0.0), 1.0)


def eta_estimate_array(mean, variance, lo=0.0, hi=1.0):
    """Vectorized :func:`eta_estimate` without validation."""
    mean = np.asarray(mean, dtype=float)
    spread = (hi - mean) * (mean - lo)
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = np.where(spread > 0.0, np.asarray(variance, dtype=float) / spread, 1.0)
    return np.minimum(np.maximum(eta, 0.0), 1.0)


def asymmetry(q: IntervalQuery) -> float:
    """Offset of the sample mean from the interval center, in half-widths.

    Returns ``|mean - B/(2A)| / halfwidth``, a value in ``[0, 1]``; 0 when the
    interval is degenerate.
    """
    q.validate()
    center, disc = _center_and_discriminant(
        float(q.n), float(q.mean), q.z * q.z * q.eta, q.lo, q.hi
    )
    if disc <= 0.0:
        return 0.0
    return abs(q.mean - center) / math.sqrt(disc)


def asymmetry_bernoulli(n: int, mean: float, z: float) -> float:
    """Closed-form asymmetry for Bernoulli samples on ``[0, 1]``.

    Computes ``(2*mean - 1)^2 z^2 / (4 n mean (1 - mean) + z^2)``, which is the
    square of :func:`asymmetry` evaluated with ``eta = 1``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 <= mean <= 1.0:
        raise ValueError(f"mean must lie in [0, 1], got {mean}")
    if z < 0:
        raise ValueError(f"z must be >= 0, got {z}")
    denom = 4.0 * n * mean * (1.0 - mean) + z * z
    if denom == 0.0:
        return 0.0
    return (2.0 * mean - 1.0) ** 2 * z * z / denom
