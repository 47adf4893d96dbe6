"""Contextual dynamic pricing with biased offline data.

A simulation laboratory for demand-learning pricing policies that warm
start from a logged dataset whose generating parameter may be shifted
from the online truth. The package provides the demand model, offline
log construction, confidence-set machinery, the policy zoo, a finite-
action linear-bandit companion, and a seeded replication harness with
CSV output behind the `pricing-lab` command.
"""

__version__ = "0.1.0"

from .model import (Context, DemandParams, ProblemSpec, optimal_price,
                    project_price, revenue, step_regret)
from .offline import OfflineDataset, OfflineSummary, build_summary, generate_offline
from .harness import (ExperimentConfig, PolicyConfig, RegretTrace, build_env,
                      run_episode, run_experiment, bias_sweep)

__all__ = [
    "__version__",
    "Context",
    "DemandParams",
    "ProblemSpec",
    "optimal_price",
    "project_price",
    "revenue",
    "step_regret",
    "OfflineDataset",
    "OfflineSummary",
    "build_summary",
    "generate_offline",
    "ExperimentConfig",
    "PolicyConfig",
    "RegretTrace",
    "build_env",
    "run_episode",
    "run_experiment",
    "bias_sweep",
]
