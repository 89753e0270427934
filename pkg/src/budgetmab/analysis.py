"""Numeric evaluation of the regret guarantees and a UCB calibration study."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Optional, Sequence

import numpy as np

from .confidence import wilson_bounds
from .environments import BanditInstance
from .policies import DEFAULT_ALPHA, DEFAULT_LAMBDA, hoeffding_index_from_log, ucb_sc_plus_index_from_log


def delta_gap(mu1_r: float, mu1_c: float, muk_r: float, muk_c: float) -> float:
    """Proportional gap ``delta_k = gap / (gap + 1/muk_c)``.

    ``delta_k`` is the fraction by which arm k's reward would have to rise
    towards 1 and its cost fall towards 0 to match the best arm's ratio.
    """
    if not (mu1_c > 0 and muk_c > 0):
        raise ValueError("expected costs must be positive")
    gap = mu1_r / mu1_c - muk_r / muk_c
    if gap < 0:
        if gap < -1e-12:
            raise ValueError(f"arm k has a higher ratio than arm 1 (gap={gap})")
        gap = 0.0
    return gap / (gap + 1.0 / muk_c)


def n_star(tau: float, rho: float, delta_k: float, mu_r: float, mu_c: float,
           eta_r: float = 1.0, eta_c: float = 1.0) -> float:
    """Play count after which arm k's index rarely exceeds the best ratio."""
    if tau < 2:
        raise ValueError(f"tau must be >= 2, got {tau}")
    if not 0.0 < delta_k <= 1.0:
        raise ValueError(f"delta_k must lie in (0, 1], got {delta_k}")
    if not 0.0 <= mu_r < 1.0:
        raise ValueError(f"mu_r must lie in [0, 1), got {mu_r}")
    if not 0.0 < mu_c <= 1.0:
        raise ValueError(f"mu_c must lie in (0, 1], got {mu_c}")
    spread = max(eta_r * mu_r / (1.0 - mu_r), eta_c * (1.0 - mu_c) / mu_c)
    return 8.0 * rho * math.log(tau) / delta_k**2 * spread


def _one_minus_sqrt_one_minus(x):
    # 1 - sqrt(1 - x), stable for small x
    return x / (1.0 + np.sqrt(1.0 - x))


def xi(tau: int, n_arms: int, rho: float) -> float:
    """Exploration-failure term ``(tau-K)(2 - sqrt(1-tau^-rho)) - sum sqrt(1-t^-rho)``.

    The sum runs over ``t = K+1 .. tau``.  It is evaluated as
    ``sum (1 - sqrt(1-t^-rho)) + (tau-K)(1 - sqrt(1-tau^-rho))``, which is the
    same quantity without the cancellation between two large terms.
    """
    tau = int(tau)
    if n_arms < 2 or tau <= n_arms:
        raise ValueError(f"need tau > K >= 2, got tau={tau}, K={n_arms}")
    if rho <= 0:
        raise ValueError(f"rho must be > 0, got {rho}")
    t = np.arange(n_arms + 1, tau + 1, dtype=float)
    terms = _one_minus_sqrt_one_minus(t ** (-rho))
    tail = (tau - n_arms) * float(_one_minus_sqrt_one_minus(float(tau) ** (-rho)))
    return math.fsum(terms.tolist()) + tail


def xi_integral_bound(tau: int, n_arms: int, rho: float) -> float:
    """Closed-form upper bound on :func:`xi` via the integral test."""
    tau = int(tau)
    if n_arms < 2 or tau <= n_arms:
        raise ValueError(f"need tau > K >= 2, got tau={tau}, K={n_arms}")
    k1 = n_arms + 1.0
    if rho == 1.0:
        integral = math.log(tau) - math.log(k1)
    else:
        integral = (tau ** (1.0 - rho) - k1 ** (1.0 - rho)) / (1.0 - rho)
    head = (tau - n_arms) * float(_one_minus_sqrt_one_minus(float(tau) ** (-rho)))
    return head + k1 ** (-rho) + integral


def horizon(budget: float, mu_c: Sequence[float]) -> int:
    """``floor(2B / min mu_c)``."""
    return int(math.floor(2.0 * budget / float(np.min(mu_c))))


def asymptotic_class(rho: float) -> str:
    return "O(log B)" if rho >= 1.0 else "O(B^(1-rho))"


@dataclass
class BoundReport:
    """Worst-case regret bound, excluding the exponentially small X(B) term."""

    budget: float
    rho: float
    tau_b: int
    xi: float
    gaps: np.ndarray
    deltas: np.ndarray
    n_stars: np.ndarray
    best_arm: int
    best_ratio_term: float
    bound_total: float
    asymptotic_class: str
    excludes: str = "X(B)"


def regret_bound(instance: BanditInstance, budget: float, rho: float,
                 etas: Optional[Sequence] = None) -> BoundReport:
    """Evaluate ``sum_k gap_k (1 + n*_k + xi) + 2 mu1_r / mu1_c``.

    Args:
        etas: optional ``(eta_r, eta_c)`` arrays, one entry per arm;
            defaults to 1 everywhere.

    Arms tied with the best arm contribute nothing.  A suboptimal arm with
    expected reward 1 makes the bound infinite.  If the horizon does not
    exceed K, no index-based round exists and ``xi`` is 0.
    """
    if not budget > 0:
        raise ValueError(f"budget must be > 0, got {budget}")
    k = instance.n_arms
    eta_r = np.ones(k) if etas is None else np.asarray(etas[0], dtype=float)
    eta_c = np.ones(k) if etas is None else np.asarray(etas[1], dtype=float)
    tau_b = horizon(budget, instance.mu_c)
    xi_val = xi(tau_b, k, rho) if tau_b > k else 0.0
    best = instance.best_arm
    gaps = instance.gaps.copy()
    gaps[best] = 0.0
    deltas = np.zeros(k)
    stars = np.zeros(k)
    total = 0.0
    for j in range(k):
        if j == best or gaps[j] <= 0.0:
            continue
        deltas[j] = delta_gap(instance.mu_r[best], instance.mu_c[best],
                              instance.mu_r[j], instance.mu_c[j])
        if instance.mu_r[j] >= 1.0:
            stars[j] = math.inf
        else:
            stars[j] = n_star(max(tau_b, 2), rho, deltas[j], instance.mu_r[j],
                              instance.mu_c[j], eta_r[j], eta_c[j])
        total += gaps[j] * (1.0 + stars[j] + xi_val)
    best_term = 2.0 * instance.mu_r[best] / instance.mu_c[best]
    return BoundReport(budget, rho, tau_b, xi_val, gaps, deltas, stars, best,
                       best_term, total + best_term, asymptotic_class(rho))


# --------------------------------------------------------------------------
# calibration of ratio UCBs
# --------------------------------------------------------------------------

CALIBRATION_POLICIES = ("omega_ucb", "m_ucb", "c_ucb", "i_ucb", "budget_ucb", "ucb_sc_plus",
                        "plug_in")
DEFAULT_CALIBRATION_POLICIES = ("omega_ucb", "m_ucb", "c_ucb", "i_ucb", "budget_ucb",
                                "ucb_sc_plus")


def normal_quantile(p: float) -> float:
    return NormalDist().inv_cdf(p)


@dataclass
class CalibrationReport:
    policies: list
    violation_rate: dict
    looseness: dict
    infinite_share: dict
    trials: int
    samples_per_trial: int
    confidence: float
    z: float


def ratio_ucb(policy: str, n, sum_r, sum_c, z: float):
    """Reward-cost ratio UCB of ``policy`` after ``n`` samples per arm.

    Competitors' logarithmic exploration term (``ln(t-1)``, or ``ln(t/n)``
    for UCB-SC+) is replaced by ``z^2 / 2``, the value at which omega-UCB with
    ``rho = 1`` uses deviation multiplier ``z``.
    """
    n = np.asarray(n, dtype=float)
    mr = np.asarray(sum_r, dtype=float) / n
    mc = np.asarray(sum_c, dtype=float) / n
    log_term = 0.5 * z * z
    with np.errstate(divide="ignore", invalid="ignore"):
        if policy == "omega_ucb":
            _, upper_r = wilson_bounds(n, mr, z)
            lower_c, _ = wilson_bounds(n, mc, z)
            return np.where(lower_c > 0.0, upper_r / lower_c, np.inf)
        if policy in DEFAULT_ALPHA:
            return hoeffding_index_from_log(policy, n, mr, mc, log_term, DEFAULT_ALPHA[policy],
                                            DEFAULT_LAMBDA)
        if policy == "budget_ucb":
            return hoeffding_index_from_log(policy, n, mr, mc, log_term, 1.0, DEFAULT_LAMBDA)
        if policy == "ucb_sc_plus":
            return ucb_sc_plus_index_from_log(n, mr, mc, log_term)
        if policy == "plug_in":
            return np.where(mc > 0.0, mr / mc, np.inf)
    raise ValueError(f"unknown calibration policy {policy!r}")


def calibrate(trials: int, samples_per_trial: int = 100, confidence: float = 0.99,
              policies: Sequence[str] = DEFAULT_CALIBRATION_POLICIES,
              rng: Optional[np.random.Generator] = None) -> CalibrationReport:
    """Violation rate and looseness of ratio UCBs on random Bernoulli arms.

    Each trial draws ``mu_r, mu_c ~ U(0, 1)`` and ``samples_per_trial``
    Bernoulli samples of each.  A violation is ``mu_r/mu_c > UCB``; looseness
    is ``UCB / (mu_r/mu_c)``.  Infinite UCBs never violate and are left out
    of the looseness mean.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if samples_per_trial < 1:
        raise ValueError("samples_per_trial must be >= 1")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    unknown = [p for p in policies if p not in CALIBRATION_POLICIES]
    if unknown:
        raise ValueError(f"unknown calibration policies {unknown}")
    if rng is None:
        rng = np.random.default_rng(0)
    z = normal_quantile(1.0 - (1.0 - confidence) / 2.0)
    mu_r = rng.uniform(0.0, 1.0, trials)
    mu_c = rng.uniform(0.0, 1.0, trials)
    while (mu_c <= 0.0).any():
        bad = mu_c <= 0.0
        mu_c[bad] = rng.uniform(0.0, 1.0, int(bad.sum()))
    sum_r = rng.binomial(samples_per_trial, mu_r)
    sum_c = rng.binomial(samples_per_trial, mu_c)
    truth = mu_r / mu_c
    violation, looseness, inf_share = {}, {}, {}
    for p in policies:
        ucb = ratio_ucb(p, samples_per_trial, sum_r, sum_c, z)
        finite = np.isfinite(ucb)
        violation[p] = float(np.mean(finite & (truth > ucb)))
        ok = finite & (truth > 0)
        looseness[p] = float(np.mean(ucb[ok] / truth[ok])) if ok.any() else math.nan
        inf_share[p] = float(np.mean(~finite))
    return CalibrationReport(list(policies), violation, looseness, inf_share, trials,
                             samples_per_trial, confidence, z)
