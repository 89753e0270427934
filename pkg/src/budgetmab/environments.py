"""Bandit instances: synthetic generators and the ad-campaign dataset loader."""

from __future__ import annotations

import csv
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

GBR_SUPPORT = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
MIN_EXPECTED_COST = 1e-6
SYNTHETIC_SETTINGS = ("S-Br", "S-GBr", "S-Bt")
BETA_PARAM_HIGH = 5.0


class DatasetError(ValueError):
    """Raised for unreadable or malformed campaign data."""


@dataclass(frozen=True)
class Bernoulli:
    p: float

    @property
    def mean(self) -> float:
        return self.p

    def sample(self, rng: np.random.Generator, size=None):
        return np.where(rng.random(size) < self.p, 1.0, 0.0)


@dataclass(frozen=True)
class GeneralizedBernoulli:
    """Discrete distribution on ``{0, 0.25, 0.5, 0.75, 1}``."""

    weights: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != GBR_SUPPORT.shape or (w < 0).any() or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"invalid generalized Bernoulli weights {self.weights}")

    @property
    def mean(self) -> float:
        return float(np.dot(self.weights, GBR_SUPPORT))

    def sample(self, rng: np.random.Generator, size=None):
        cdf = np.cumsum(self.weights)
        cdf[-1] = 1.0
        idx = np.searchsorted(cdf, rng.random(size), side="right")
        return GBR_SUPPORT[np.minimum(idx, len(GBR_SUPPORT) - 1)]


@dataclass(frozen=True)
class Beta:
    a: float
    b: float

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.beta(self.a, self.b, size)


Distribution = Union[Bernoulli, GeneralizedBernoulli, Beta]


@dataclass(frozen=True)
class ArmSpec:
    reward_dist: Distribution
    cost_dist: Distribution

    @property
    def mu_r(self) -> float:
        return self.reward_dist.mean

    @property
    def mu_c(self) -> float:
        return self.cost_dist.mean


@dataclass(frozen=True)
class BanditInstance:
    """Hidden truth of one game.

    ``best_arm`` maximizes ``mu_r / mu_c``; ``gaps[k]`` is the best ratio
    minus arm ``k``'s ratio.
    """

    arms: tuple
    setting_id: str = "custom"
    mu_r: np.ndarray = field(init=False, repr=False, compare=False)
    mu_c: np.ndarray = field(init=False, repr=False, compare=False)
    ratios: np.ndarray = field(init=False, repr=False, compare=False)
    best_arm: int = field(init=False)
    gaps: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        arms = tuple(self.arms)
        if len(arms) < 2:
            raise ValueError("a bandit instance needs at least two arms")
        mu_r = np.array([a.mu_r for a in arms])
        mu_c = np.array([a.mu_c for a in arms])
        if (mu_c <= 0).any() or (mu_c > 1).any() or (mu_r < 0).any() or (mu_r > 1).any():
            raise ValueError("expected rewards must lie in [0, 1] and costs in (0, 1]")
        ratios = mu_r / mu_c
        best = int(np.argmax(ratios))
        object.__setattr__(self, "arms", arms)
        object.__setattr__(self, "mu_r", mu_r)
        object.__setattr__(self, "mu_c", mu_c)
        object.__setattr__(self, "ratios", ratios)
        object.__setattr__(self, "best_arm", best)
        object.__setattr__(self, "gaps", ratios[best] - ratios)

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    @classmethod
    def bernoulli(cls, mu_r: Sequence[float], mu_c: Sequence[float],
                  setting_id: str = "custom") -> "BanditInstance":
        return cls(tuple(ArmSpec(Bernoulli(float(r)), Bernoulli(float(c)))
                         for r, c in zip(mu_r, mu_c)), setting_id)


def pull(instance: BanditInstance, arm: int, rng: np.random.Generator):
    """One independent ``(reward, cost)`` draw from ``arm``."""
    spec = instance.arms[arm]
    return float(spec.reward_dist.sample(rng)), float(spec.cost_dist.sample(rng))


class ArmSampler:
    """Pre-draws outcomes in blocks to keep per-round overhead small.

    Produces the same kind of iid draws as :func:`pull`; reward and cost
    streams of every arm are filled independently from ``rng``.
    """

    def __init__(self, instance: BanditInstance, rng: np.random.Generator, block: int = 512):
        self.instance = instance
        self.rng = rng
        self.block = block
        k = instance.n_arms
        self._rewards = [np.empty(0)] * k
        self._costs = [np.empty(0)] * k
        self._pos = [0] * k

    def pull(self, arm: int):
        pos = self._pos[arm]
        if pos >= len(self._rewards[arm]):
            spec = self.instance.arms[arm]
            self._rewards[arm] = spec.reward_dist.sample(self.rng, self.block).tolist()
            self._costs[arm] = spec.cost_dist.sample(self.rng, self.block).tolist()
            pos = 0
        self._pos[arm] = pos + 1
        return self._rewards[arm][pos], self._costs[arm][pos]


# --------------------------------------------------------------------------
# synthetic settings
# --------------------------------------------------------------------------


def parse_setting_id(setting_id: str):
    """Split ``"S-Br-10"`` into ``("S-Br", 10)``; K is ``None`` when absent."""
    m = re.fullmatch(r"(S-Br|S-GBr|S-Bt|FB-Br|FB-Bt)(?:-(\d+))?", setting_id)
    if m is None:
        raise ValueError(f"unknown setting {setting_id!r}")
    family, k = m.group(1), (int(m.group(2)) if m.group(2) else None)
    if k is not None and family.startswith("FB"):
        raise ValueError(f"{setting_id!r}: campaign settings take their arm count from the data")
    if k is not None and k < 2:
        raise ValueError(f"{setting_id!r}: need at least two arms")
    return family, k


def _draw_dist(setting: str, rng: np.random.Generator) -> Distribution:
    if setting == "S-Br":
        return Bernoulli(float(rng.uniform(0.0, 1.0)))
    if setting == "S-GBr":
        w = rng.uniform(0.0, 1.0, size=len(GBR_SUPPORT))
        while w.sum() <= 0.0:
            w = rng.uniform(0.0, 1.0, size=len(GBR_SUPPORT))
        w = w / w.sum()
        # absorb rounding so the weights sum to one exactly
        w[-1] = max(1.0 - w[:-1].sum(), 0.0)
        return GeneralizedBernoulli(tuple(float(x) for x in w))
    if setting == "S-Bt":
        a, b = rng.uniform(0.0, BETA_PARAM_HIGH, size=2)
        while a <= 0.0 or b <= 0.0:
            a, b = rng.uniform(0.0, BETA_PARAM_HIGH, size=2)
        return Beta(float(a), float(b))
    raise ValueError(f"unknown synthetic setting {setting!r}")


def gen_synthetic(setting: str, n_arms: int, rng: np.random.Generator) -> BanditInstance:
    """Random instance of a synthetic setting (``S-Br``, ``S-GBr`` or ``S-Bt``).

    Reward and cost distributions of each arm are drawn independently.  An arm
    whose expected cost falls below ``MIN_EXPECTED_COST`` is redrawn.
    """
    if setting not in SYNTHETIC_SETTINGS:
        raise ValueError(f"unknown synthetic setting {setting!r}")
    if n_arms < 2:
        raise ValueError(f"need at least two arms, got {n_arms}")
    arms = []
    while len(arms) < n_arms:
        reward = _draw_dist(setting, rng)
        cost = _draw_dist(setting, rng)
        if cost.mean < MIN_EXPECTED_COST or reward.mean >= 1.0:
            continue
        arms.append(ArmSpec(reward, cost))
    return BanditInstance(tuple(arms), f"{setting}-{n_arms}")


# --------------------------------------------------------------------------
# advertising campaigns
# --------------------------------------------------------------------------


DEFAULT_COLUMNS = {
    "ad_id": "ad_id",
    "gender": "gender",
    "age": "age",
    "clicks": "Clicks",
    "spend": "Spent",
    "conversions": "Approved_Conversion",
}
DEFAULT_GROUP_BY = ("gender", "age")


@dataclass(frozen=True)
class CampaignAd:
    ad_id: str
    reward_per_click: float
    cost_per_click: float


def read_campaign_table(path, columns: Optional[dict] = None,
                        group_by: Sequence[str] = DEFAULT_GROUP_BY,
                        delimiter: str = ",") -> dict:
    """Group ads into campaigns and compute raw per-click reward and cost.

    ``columns`` maps logical names (see ``DEFAULT_COLUMNS``) to header
    names; ``group_by`` entries may be logical names or raw header names.
    Ads with zero clicks or zero spend are dropped.

    Returns:
        Mapping from the group key tuple to a list of :class:`CampaignAd`.
    """
    cols = dict(DEFAULT_COLUMNS)
    if columns:
        cols.update(columns)
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot open dataset {path}: {exc}") from exc
    groups = defaultdict(list)
    with fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        header = reader.fieldnames or []
        group_cols = [cols.get(g, g) for g in group_by]
        needed = [cols["ad_id"], cols["clicks"], cols["spend"], cols["conversions"], *group_cols]
        missing = [c for c in needed if c not in header]
        if missing:
            raise DatasetError(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                clicks = float(row[cols["clicks"]])
                spend = float(row[cols["spend"]])
                conversions = float(row[cols["conversions"]])
            except (TypeError, ValueError) as exc:
                raise DatasetError(f"{path}:{lineno}: unparseable row ({exc})") from exc
            if clicks < 0 or spend < 0 or conversions < 0:
                raise DatasetError(f"{path}:{lineno}: negative count or spend")
            if clicks == 0 or spend == 0:
                continue
            key = tuple(row[c] for c in group_cols)
            groups[key].append(CampaignAd(row[cols["ad_id"]], conversions / clicks,
                                          spend / clicks))
    return dict(groups)


def _beta_with_mean(mu: float, rng: np.random.Generator) -> Distribution:
    if mu <= 0.0 or mu >= 1.0:
        # point mass; a Beta with this mean does not exist
        return Bernoulli(mu)
    b = float(rng.uniform(0.0, BETA_PARAM_HIGH))
    while b <= 0.0:
        b = float(rng.uniform(0.0, BETA_PARAM_HIGH))
    return Beta(b * mu / (1.0 - mu), b)


def campaign_instances(groups: dict, mode: str, rng: Optional[np.random.Generator] = None,
                       prefix: Optional[str] = None) -> list:
    """Turn grouped ads into bandit instances.

    Rewards and costs are rescaled by their campaign maximum, so the most
    expensive ad of each campaign has expected cost exactly 1.
    """
    if mode not in ("bernoulli", "beta"):
        raise ValueError(f"mode must be 'bernoulli' or 'beta', got {mode!r}")
    if mode == "beta" and rng is None:
        raise ValueError("beta mode needs a random generator")
    prefix = prefix or ("FB-Br" if mode == "bernoulli" else "FB-Bt")
    instances = []
    for key in sorted(groups):
        ads = groups[key]
        if len(ads) < 2:
            continue
        r = np.array([a.reward_per_click for a in ads])
        c = np.array([a.cost_per_click for a in ads])
        r = r / r.max() if r.max() > 0 else r
        c = c / c.max()
        arms = []
        for mu_r, mu_c in zip(r.tolist(), c.tolist()):
            if mode == "bernoulli":
                arms.append(ArmSpec(Bernoulli(mu_r), Bernoulli(mu_c)))
            else:
                arms.append(ArmSpec(_beta_with_mean(mu_r, rng), _beta_with_mean(mu_c, rng)))
        instances.append(BanditInstance(tuple(arms), f"{prefix}[{'/'.join(key)}]"))
    return instances


def load_campaigns(path, mode: str = "bernoulli", rng: Optional[np.random.Generator] = None,
                   columns: Optional[dict] = None, group_by: Sequence[str] = DEFAULT_GROUP_BY,
                   delimiter: str = ",") -> list:
    groups = read_campaign_table(path, columns, group_by, delimiter)
    instances = campaign_instances(groups, mode, rng)
    if not instances:
        raise DatasetError(f"{path}: no campaign with at least two usable ads")
    return instances
