"""Budgeted multi-armed bandits with asymmetric (generalized Wilson) confidence bounds."""

__version__ = "0.1.0"

from .confidence import Interval, IntervalQuery, wilson_interval, z_of_t  # noqa: E402
from .environments import BanditInstance, gen_synthetic, load_campaigns  # noqa: E402
from .policies import PolicyConfig, make_policy  # noqa: E402
from .simulator import RunConfig, run_episode, run_experiment  # noqa: E402

__all__ = [
    "BanditInstance",
    "Interval",
    "IntervalQuery",
    "PolicyConfig",
    "RunConfig",
    "gen_synthetic",
    "load_campaigns",
    "make_policy",
    "run_episode",
    "run_experiment",
    "wilson_interval",
    "z_of_t",
]
