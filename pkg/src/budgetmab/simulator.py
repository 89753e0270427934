"""Budget-constrained episodes and seeded multi-policy experiments."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import seeding
from .environments import (
    ArmSampler,
    BanditInstance,
    campaign_instances,
    gen_synthetic,
    parse_setting_id,
    read_campaign_table,
)
from .policies import Policy, PolicyConfig, make_policy


@dataclass(frozen=True)
class DatasetSpec:
    """Where and how to read the advertising data for ``FB-*`` settings."""

    path: str
    columns: Optional[dict] = None
    group_by: tuple = ("gender", "age")
    delimiter: str = ","


@dataclass(frozen=True)
class RunConfig:
    setting_id: str
    policies: tuple
    n_arms: Optional[int] = None
    budget_multiplier: float = 1.5e5
    repetitions: int = 100
    checkpoints: int = 50
    master_seed: int = 0
    dataset: Optional[DatasetSpec] = None

    def __post_init__(self):
        object.__setattr__(self, "policies", tuple(self.policies))
        if not self.budget_multiplier > 0:
            raise ValueError("budget_multiplier must be > 0")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.checkpoints < 1:
            raise ValueError("checkpoints must be >= 1")
        if not self.policies:
            raise ValueError("at least one policy is required")
        labels = [p.label for p in self.policies]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate policies in {labels}")
        family, k = parse_setting_id(self.setting_id)
        if family.startswith("FB"):
            if self.dataset is None:
                raise ValueError(f"setting {self.setting_id} needs a dataset")
        elif self.n_arms is None and k is None:
            raise ValueError(f"setting {self.setting_id} needs a number of arms")
        elif self.n_arms is not None and k is not None and self.n_arms != k:
            raise ValueError(f"setting {self.setting_id} conflicts with n_arms={self.n_arms}")

    @property
    def family(self) -> str:
        return parse_setting_id(self.setting_id)[0]

    @property
    def arms(self) -> Optional[int]:
        return self.n_arms if self.n_arms is not None else parse_setting_id(self.setting_id)[1]

    @property
    def label(self) -> str:
        if self.family.startswith("FB"):
            return self.family
        return f"{self.family}-{self.arms}"


@dataclass
class EpisodeResult:
    pulls_per_arm: np.ndarray
    total_reward: float
    total_cost: float
    rounds: int
    checkpoints: np.ndarray
    regret: np.ndarray

    @property
    def final_regret(self) -> float:
        return float(self.regret[-1])


def checkpoint_grid(budget_multiplier: float, count: int) -> np.ndarray:
    """Log-spaced normalized budgets ending exactly at ``budget_multiplier``."""
    start = 1.0 if budget_multiplier > 1.0 else budget_multiplier / 10.0
    if count == 1:
        return np.array([float(budget_multiplier)])
    grid = np.geomspace(start, budget_multiplier, count)
    grid[-1] = budget_multiplier
    return grid


def pseudo_regret(instance: BanditInstance, pulls) -> float:
    """``sum_k mu_c[k] * gap[k] * pulls[k]``."""
    return float(np.dot(instance.mu_c * instance.gaps, pulls))


def run_episode(instance: BanditInstance, policy: Policy, budget: float,
                checkpoints: Sequence[float], rng: np.random.Generator) -> EpisodeResult:
    """Play until the budget is spent; the last pull may overdraw.

    Args:
        checkpoints: increasing normalized budgets; regret is recorded at the
            first round whose cumulative cost reaches
            ``checkpoint * min(mu_c)``.
        rng: outcome stream for the arm draws.
    """
    if not budget > 0:
        raise ValueError(f"budget must be > 0, got {budget}")
    checkpoints = np.asarray(checkpoints, dtype=float)
    thresholds = np.minimum(checkpoints * instance.mu_c.min(), budget).tolist()
    weights = instance.mu_c * instance.gaps
    sampler = ArmSampler(instance, rng)
    counts = np.zeros(instance.n_arms, dtype=np.int64)
    regret = np.empty(len(thresholds))
    next_cp = 0
    n_cp = len(thresholds)
    spent = 0.0
    total_reward = 0.0
    t = 1
    while spent < budget:
        arm = policy.step(t).arm
        reward, cost = sampler.pull(arm)
        policy.update(arm, reward, cost)
        counts[arm] += 1
        spent += cost
        total_reward += reward
        while next_cp < n_cp and spent >= thresholds[next_cp]:
            regret[next_cp] = float(np.dot(weights, counts))
            next_cp += 1
        t += 1
    if next_cp < n_cp:
        regret[next_cp:] = float(np.dot(weights, counts))
    return EpisodeResult(counts, total_reward, spent, t - 1, checkpoints, regret)


@dataclass
class RegretCurve:
    """Pseudo-regret of every (policy, repetition) at shared checkpoints.

    ``regret`` has shape ``(policies, repetitions, checkpoints)``.
    """

    setting_id: str
    policies: list
    checkpoints: np.ndarray
    regret: np.ndarray
    instance_ids: list = field(default_factory=list)
    rounds: Optional[np.ndarray] = None

    @property
    def labels(self) -> list:
        return [p.label for p in self.policies]

    def mean(self) -> np.ndarray:
        return self.regret.mean(axis=1)

    def stderr(self) -> np.ndarray:
        reps = self.regret.shape[1]
        if reps < 2:
            return np.zeros(self.regret.shape[::2])
        return self.regret.std(axis=1, ddof=1) / math.sqrt(reps)

    def final(self) -> np.ndarray:
        """Final regret, shape ``(policies, repetitions)``."""
        return self.regret[:, :, -1]

    def series(self, label: str) -> np.ndarray:
        return self.regret[self.labels.index(label)]


def _load_groups(config: RunConfig):
    ds = config.dataset
    return read_campaign_table(ds.path, ds.columns, ds.group_by, ds.delimiter)


def instance_for_repetition(config: RunConfig, repetition: int, groups=None) -> BanditInstance:
    """The environment every policy faces in ``repetition``."""
    rng = seeding.stream(config.master_seed, repetition, seeding.ROLE_INSTANCE)
    family = config.family
    if family.startswith("FB"):
        if groups is None:
            groups = _load_groups(config)
        mode = "bernoulli" if family == "FB-Br" else "beta"
        instances = campaign_instances(groups, mode, rng)
        if not instances:
            raise ValueError("dataset yields no campaign with at least two ads")
        return instances[repetition % len(instances)]
    return gen_synthetic(family, config.arms, rng)


def run_repetition(config: RunConfig, repetition: int, groups=None):
    """Run every policy of ``config`` on the instance of one repetition."""
    instance = instance_for_repetition(config, repetition, groups)
    budget = config.budget_multiplier * float(instance.mu_c.min())
    grid = checkpoint_grid(config.budget_multiplier, config.checkpoints)
    results = []
    for pc in config.policies:
        key = seeding.label_key(pc.label)
        decisions = seeding.stream(config.master_seed, repetition, seeding.ROLE_DECISIONS, key)
        outcomes = seeding.stream(config.master_seed, repetition, seeding.ROLE_OUTCOMES, key)
        policy = make_policy(pc, instance.n_arms, decisions)
        results.append(run_episode(instance, policy, budget, grid, outcomes))
    return instance.setting_id, results


def _run_repetition_star(args):
    return run_repetition(*args)


def run_experiment(config: RunConfig, workers: int = 1) -> RegretCurve:
    """Seeded repetitions of all configured policies.

    The output depends only on ``config``: each repetition derives its
    streams from ``(master_seed, repetition, role)``, so the worker count and
    completion order do not matter.
    """
    groups = _load_groups(config) if config.family.startswith("FB") else None
    jobs = [(config, r, groups) for r in range(config.repetitions)]
    if workers > 1 and config.repetitions > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_run_repetition_star, jobs))
    else:
        outputs = [run_repetition(*job) for job in jobs]
    grid = checkpoint_grid(config.budget_multiplier, config.checkpoints)
    n_pol = len(config.policies)
    regret = np.empty((n_pol, config.repetitions, len(grid)))
    rounds = np.empty((n_pol, config.repetitions), dtype=np.int64)
    instance_ids = []
    for r, (instance_id, results) in enumerate(outputs):
        instance_ids.append(instance_id)
        for p, res in enumerate(results):
            regret[p, r] = res.regret
            rounds[p, r] = res.rounds
    return RegretCurve(config.label, list(config.policies), grid, regret, instance_ids, rounds)
