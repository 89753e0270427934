"""Arm-selection policies for budgeted bandits.

Every policy shares one contract: :meth:`Policy.step` returns the arm to play
in round ``t`` and :meth:`Policy.update` feeds back the observed reward and
cost.  Index policies first sweep arms ``0..K-1`` once, then play the argmax
of their index, breaking ties uniformly at random from the policy's own
generator.

``t`` is the number of completed rounds plus one, so the first index-based
decision happens at ``t = K + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .confidence import eta_estimate, eta_estimate_array

POLICY_KINDS = (
    "omega_ucb",
    "omega_star_ucb",
    "bts",
    "m_ucb",
    "c_ucb",
    "i_ucb",
    "budget_ucb",
    "ucb_sc_plus",
    "fixed_arm",
)

# recommended exploration weights of the Hoeffding-style ratio policies
DEFAULT_ALPHA = {"m_ucb": 2.0**-4, "c_ucb": 2.0**-3, "i_ucb": 2.0**-2}
DEFAULT_RHO = 0.25
DEFAULT_LAMBDA = 1e-4
DEFAULT_ETA_MIN_SAMPLES = 30


class PolicyConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PolicyConfig:
    """Which policy to build and with which hyperparameters.

    Only the fields relevant to ``kind`` are consulted.  ``alpha=None``
    resolves to the recommended weight for m-, c- and i-UCB.
    """

    kind: str
    rho: float = DEFAULT_RHO
    alpha: Optional[float] = None
    lam: float = DEFAULT_LAMBDA
    eta_min_samples: float = DEFAULT_ETA_MIN_SAMPLES
    fixed_arm_index: Optional[int] = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise PolicyConfigError(f"unknown policy kind {self.kind!r}")
        if self.kind in ("omega_ucb", "omega_star_ucb") and not self.rho > 0:
            raise PolicyConfigError(f"rho must be > 0, got {self.rho}")
        if self.kind in DEFAULT_ALPHA and self.alpha is not None and not self.alpha > 0:
            raise PolicyConfigError(f"alpha must be > 0, got {self.alpha}")
        if self.kind == "budget_ucb" and not self.lam > 0:
            raise PolicyConfigError(f"lambda must be > 0, got {self.lam}")
        if self.kind == "omega_star_ucb" and not self.eta_min_samples >= 1:
            raise PolicyConfigError("eta_min_samples must be >= 1")
        if self.kind == "fixed_arm" and (self.fixed_arm_index is None or self.fixed_arm_index < 0):
            raise PolicyConfigError("fixed_arm requires a non-negative fixed_arm_index")

    @property
    def exploration_weight(self) -> float:
        if self.alpha is not None:
            return self.alpha
        return DEFAULT_ALPHA.get(self.kind, 1.0)

    @property
    def uses_rho(self) -> bool:
        return self.kind in ("omega_ucb", "omega_star_ucb")

    @property
    def label(self) -> str:
        if self.uses_rho:
            return f"{self.kind}(rho={self.rho!r})"
        if self.kind in DEFAULT_ALPHA:
            return f"{self.kind}(alpha={self.exploration_weight!r})"
        if self.kind == "fixed_arm":
            return f"fixed_arm({self.fixed_arm_index})"
        return self.kind

    def with_rho(self, rho: float) -> "PolicyConfig":
        return replace(self, rho=rho)


@dataclass
class ArmStats:
    """Running sums of one arm's observations."""

    n: int = 0
    reward_sum: float = 0.0
    reward_sq_sum: float = 0.0
    cost_sum: float = 0.0
    cost_sq_sum: float = 0.0

    @classmethod
    def from_means(cls, n: int, mean_reward: float, mean_cost: float,
                   reward_var: float = 0.0, cost_var: float = 0.0) -> "ArmStats":
        """Build sums that reproduce the given means and Bessel-corrected variances."""
        return cls(
            n=n,
            reward_sum=n * mean_reward,
            reward_sq_sum=(n - 1) * reward_var + n * mean_reward**2,
            cost_sum=n * mean_cost,
            cost_sq_sum=(n - 1) * cost_var + n * mean_cost**2,
        )

    def add(self, reward: float, cost: float) -> None:
        self.n += 1
        self.reward_sum += reward
        self.reward_sq_sum += reward * reward
        self.cost_sum += cost
        self.cost_sq_sum += cost * cost

    @property
    def mean_reward(self) -> float:
        return _clip01(self.reward_sum / self.n)

    @property
    def mean_cost(self) -> float:
        return _clip01(self.cost_sum / self.n)

    @property
    def reward_var(self) -> float:
        return _sample_var(self.n, self.reward_sum, self.reward_sq_sum)

    @property
    def cost_var(self) -> float:
        return _sample_var(self.n, self.cost_sum, self.cost_sq_sum)


def _clip01(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def _sample_var(n, s, sq):
    # Bessel-corrected; defined as 0 for a single observation
    if n < 2:
        return 0.0
    return max((sq - s * s / n) / (n - 1), 0.0)


def _sample_var_array(n, s, sq):
    n = np.asarray(n, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        var = (sq - s * s / n) / (n - 1.0)
    return np.where(n >= 2, np.maximum(var, 0.0), 0.0)


@dataclass(frozen=True)
class Decision:
    arm: int
    index_values: np.ndarray = field(repr=False)


# --------------------------------------------------------------------------
# index formulas
# --------------------------------------------------------------------------


def omega_index_array(n, mean_r, mean_c, t, rho, eta_r=1.0, eta_c=1.0):
    """Ratio of the reward upper bound to the cost lower bound, per arm.

    Arms whose cost lower bound is 0 get ``+inf``.
    """
    # fused form of wilson_bounds on [0, 1]; evaluated once per arm and round
    n = np.asarray(n, dtype=float)
    z2 = 2.0 * rho * (math.log(t) if np.ndim(t) == 0 else np.log(t))
    s_r = z2 * eta_r
    s_c = z2 * eta_c
    a_r = n + s_r
    a_c = n + s_c
    half_r = np.sqrt(s_r * n * mean_r * (1.0 - mean_r) + 0.25 * s_r * s_r) / a_r
    half_c = np.sqrt(s_c * n * mean_c * (1.0 - mean_c) + 0.25 * s_c * s_c) / a_c
    upper_r = np.maximum(np.minimum((n * mean_r + 0.5 * s_r) / a_r + half_r, 1.0), mean_r)
    lower_c = np.minimum(np.maximum((n * mean_c + 0.5 * s_c) / a_c - half_c, 0.0), mean_c)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(lower_c > 0.0, upper_r / lower_c, np.inf)


def omega_index(stats: ArmStats, t: int, rho: float, eta_r: float = 1.0,
                eta_c: float = 1.0) -> float:
    if stats.n < 1:
        raise ValueError("omega_index needs at least one observation")
    if t < 2:
        raise ValueError(f"t must be >= 2, got {t}")
    return float(omega_index_array(stats.n, stats.mean_reward, stats.mean_cost,
                                   t, rho, eta_r, eta_c))


def omega_star_eta(stats: ArmStats, min_samples: float = DEFAULT_ETA_MIN_SAMPLES):
    """Variance ratios ``(eta_r, eta_c)``; ``(1, 1)`` until ``min_samples`` pulls."""
    if stats.n < min_samples:
        return 1.0, 1.0
    return (
        eta_estimate(stats.mean_reward, stats.reward_var),
        eta_estimate(stats.mean_cost, stats.cost_var),
    )


def hoeffding_index_from_log(kind, n, mr, mc, log_term, weight, lam=DEFAULT_LAMBDA):
    """m-, c-, i- and Budget-UCB indexes with exploration ``weight * sqrt(log_term / n)``."""
    eps = weight * np.sqrt(log_term / np.asarray(n, dtype=float))
    mr = np.asarray(mr, dtype=float)
    mc = np.asarray(mc, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind == "m_ucb":
            denom = np.maximum(mc - eps, 0.0)
            return np.where(denom > 0.0, np.minimum(mr + eps, 1.0) / denom, np.inf)
        if kind == "c_ucb":
            return np.where(mc > 0.0, (mr + eps) / mc, np.inf)
        if kind == "i_ucb":
            return np.where(mc > 0.0, mr / mc + eps, np.inf)
        if kind == "budget_ucb":
            ratio_ucb = np.minimum(mr + eps, 1.0) / np.maximum(mc - eps, lam)
            return np.where(mc > 0.0, mr / mc + eps / mc * (1.0 + ratio_ucb), np.inf)
    raise ValueError(f"not a Hoeffding-style policy: {kind!r}")


def _hoeffding_index_array(kind, n, mr, mc, t, weight, lam):
    return hoeffding_index_from_log(kind, n, mr, mc, math.log(t - 1), weight, lam)


def ucb_sc_plus_index_from_log(n, mr, mc, log_term):
    """UCB-SC+ index; ``log_term`` stands for ``ln(t / n)``."""
    n = np.asarray(n, dtype=float)
    kappa = mr * mr + mc * mc
    explore = ~(mc * mc > log_term / (2.0 * n)) | (kappa <= 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.sqrt(log_term / (2.0 * kappa * n - log_term))
        value = (mr + a * mc) / (mc - a * mr)
    return np.where(explore, np.inf, value)


def _ucb_sc_plus_index_array(n, mr, mc, t):
    return ucb_sc_plus_index_from_log(n, mr, mc, np.log(t / np.asarray(n, dtype=float)))


def _bts_index_array(n, successes_r, successes_c, rng):
    n = np.asarray(n, dtype=float)
    sample_r = rng.beta(successes_r + 1.0, n - successes_r + 1.0)
    sample_c = rng.beta(successes_c + 1.0, n - successes_c + 1.0)
    with np.errstate(divide="ignore"):
        return np.where(sample_c > 0.0, sample_r / sample_c, np.inf)


def competitor_index(kind: str, stats: ArmStats, t: int, config: PolicyConfig,
                     rng: Optional[np.random.Generator] = None) -> float:
    """Index of one arm under a competitor policy.

    For ``bts`` the stats must already hold discretized (0/1) observations,
    so that ``n * mean`` is the posterior success count.
    """
    if stats.n < 1:
        raise ValueError("competitor_index needs at least one observation")
    if t < 2:
        raise ValueError(f"t must be >= 2, got {t}")
    mr, mc = stats.mean_reward, stats.mean_cost
    if kind == "bts":
        if rng is None:
            raise ValueError("bts needs a random generator")
        return float(_bts_index_array(stats.n, stats.n * mr, stats.n * mc, rng))
    if kind == "ucb_sc_plus":
        return float(_ucb_sc_plus_index_array(stats.n, mr, mc, t))
    if kind in ("m_ucb", "c_ucb", "i_ucb"):
        weight = config.alpha if config.alpha is not None else DEFAULT_ALPHA[kind]
        return float(_hoeffding_index_array(kind, stats.n, mr, mc, t, weight, config.lam))
    if kind == "budget_ucb":
        return float(_hoeffding_index_array(kind, stats.n, mr, mc, t, 1.0, config.lam))
    raise ValueError(f"not a competitor kind: {kind!r}")


def bts_posterior(stats: ArmStats):
    """Beta posterior parameters ``((a_r, b_r), (a_c, b_c))`` for BTS."""
    a_r = stats.n * stats.mean_reward + 1.0
    a_c = stats.n * stats.mean_cost + 1.0
    return (a_r, stats.n + 2.0 - a_r), (a_c, stats.n + 2.0 - a_c)


def argmax_random_tie(values: np.ndarray, rng: np.random.Generator) -> int:
    best = values.max()
    ties = np.flatnonzero(values == best)
    if ties.size == 1:
        return int(ties[0])
    return int(ties[rng.integers(ties.size)])


# --------------------------------------------------------------------------
# stateful policies
# --------------------------------------------------------------------------


class Policy:
    """Base class holding per-arm sums as numpy arrays.

    Subclasses implement :meth:`index_values`.  A policy is a single-threaded
    state machine: calls to :meth:`step` and :meth:`update` must alternate.
    """

    def __init__(self, config: PolicyConfig, n_arms: int, rng: np.random.Generator):
        if n_arms < 2:
            raise ValueError(f"need at least two arms, got {n_arms}")
        self.config = config
        self.n_arms = n_arms
        self.rng = rng
        self.counts = np.zeros(n_arms, dtype=np.int64)
        self.reward_sum = np.zeros(n_arms)
        self.reward_sq_sum = np.zeros(n_arms)
        self.cost_sum = np.zeros(n_arms)
        self.cost_sq_sum = np.zeros(n_arms)
        self._initialized = False

    def index_values(self, t: int) -> np.ndarray:
        raise NotImplementedError

    def step(self, t: int) -> Decision:
        if not self._initialized:
            unplayed = np.flatnonzero(self.counts == 0)
            if unplayed.size:
                values = np.where(self.counts == 0, np.inf, -np.inf)
                return Decision(int(unplayed[0]), values)
            self._initialized = True
        values = self.index_values(t)
        return Decision(argmax_random_tie(values, self.rng), values)

    def update(self, arm: int, reward: float, cost: float) -> None:
        if not (0.0 <= reward <= 1.0 and 0.0 <= cost <= 1.0):
            raise ValueError(f"observation out of [0, 1]: reward={reward}, cost={cost}")
        self.counts[arm] += 1
        self.reward_sum[arm] += reward
        self.reward_sq_sum[arm] += reward * reward
        self.cost_sum[arm] += cost
        self.cost_sq_sum[arm] += cost * cost

    def stats(self, arm: int) -> ArmStats:
        return ArmStats(int(self.counts[arm]), float(self.reward_sum[arm]),
                        float(self.reward_sq_sum[arm]), float(self.cost_sum[arm]),
                        float(self.cost_sq_sum[arm]))

    def _means(self):
        n = self.counts
        return (np.minimum(np.maximum(self.reward_sum / n, 0.0), 1.0),
                np.minimum(np.maximum(self.cost_sum / n, 0.0), 1.0))


class OmegaUCB(Policy):
    """Generalized-Wilson ratio UCB with ``eta = 1`` for rewards and costs."""

    def etas(self, mean_r, mean_c):
        return 1.0, 1.0

    def index_values(self, t):
        mean_r, mean_c = self._means()
        eta_r, eta_c = self.etas(mean_r, mean_c)
        return omega_index_array(self.counts, mean_r, mean_c, t, self.config.rho, eta_r, eta_c)


class OmegaStarUCB(OmegaUCB):
    """Omega-UCB with variance ratios estimated once an arm has enough pulls."""

    def etas(self, mean_r, mean_c):
        n = self.counts
        ready = n >= self.config.eta_min_samples
        if not ready.any():
            return 1.0, 1.0
        var_r = _sample_var_array(n, self.reward_sum, self.reward_sq_sum)
        var_c = _sample_var_array(n, self.cost_sum, self.cost_sq_sum)
        eta_r = np.where(ready, eta_estimate_array(mean_r, var_r), 1.0)
        eta_c = np.where(ready, eta_estimate_array(mean_c, var_c), 1.0)
        return eta_r, eta_c


class HoeffdingRatioUCB(Policy):
    """m-UCB, c-UCB, i-UCB and Budget-UCB: exploration ``~ sqrt(ln(t-1)/n)``."""

    def __init__(self, config, n_arms, rng):
        super().__init__(config, n_arms, rng)
        self._weight = 1.0 if config.kind == "budget_ucb" else config.exploration_weight

    def index_values(self, t):
        mean_r, mean_c = self._means()
        return _hoeffding_index_array(self.config.kind, self.counts, mean_r, mean_c, t,
                                      self._weight, self.config.lam)


class UCBSCPlus(Policy):
    def index_values(self, t):
        mean_r, mean_c = self._means()
        return _ucb_sc_plus_index_array(self.counts, mean_r, mean_c, t)


class BTS(Policy):
    """Budgeted Thompson sampling on Bernoulli-discretized observations.

    A continuous observation ``x`` counts as a success with probability ``x``;
    the coin is flipped with the policy's own generator.
    """

    def __init__(self, config, n_arms, rng):
        super().__init__(config, n_arms, rng)
        self.successes_r = np.zeros(n_arms)
        self.successes_c = np.zeros(n_arms)

    def update(self, arm, reward, cost):
        super().update(arm, reward, cost)
        u_r, u_c = self.rng.random(2)
        self.successes_r[arm] += u_r < reward
        self.successes_c[arm] += u_c < cost

    def discretized_stats(self, arm: int) -> ArmStats:
        n = int(self.counts[arm])
        s_r, s_c = float(self.successes_r[arm]), float(self.successes_c[arm])
        return ArmStats(n, s_r, s_r, s_c, s_c)

    def index_values(self, t):
        return _bts_index_array(self.counts, self.successes_r, self.successes_c, self.rng)


class FixedArm(Policy):
    """Baseline that always plays one arm, without an initialization sweep."""

    def __init__(self, config, n_arms, rng):
        super().__init__(config, n_arms, rng)
        if config.fixed_arm_index >= n_arms:
            raise PolicyConfigError(
                f"fixed_arm_index {config.fixed_arm_index} out of range for {n_arms} arms")

    def index_values(self, t):
        values = np.full(self.n_arms, -np.inf)
        values[self.config.fixed_arm_index] = 0.0
        return values

    def step(self, t):
        values = self.index_values(t)
        return Decision(self.config.fixed_arm_index, values)


_POLICY_CLASSES = {
    "omega_ucb": OmegaUCB,
    "omega_star_ucb": OmegaStarUCB,
    "bts": BTS,
    "m_ucb": HoeffdingRatioUCB,
    "c_ucb": HoeffdingRatioUCB,
    "i_ucb": HoeffdingRatioUCB,
    "budget_ucb": HoeffdingRatioUCB,
    "ucb_sc_plus": UCBSCPlus,
    "fixed_arm": FixedArm,
}


def make_policy(config: PolicyConfig, n_arms: int,
                rng: Optional[np.random.Generator] = None) -> Policy:
    """Instantiate the policy described by ``config`` for ``n_arms`` arms."""
    if rng is None:
        rng = np.random.default_rng(0)
    return _POLICY_CLASSES[config.kind](config, n_arms, rng)
