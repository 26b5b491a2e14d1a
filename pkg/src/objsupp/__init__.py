"""Objective Suppression for uniformly constrained MDPs.

Modules: ``core`` (CMDP types, trajectories, rollouts), ``envs`` (HazardGrid,
PointNav2D), ``approx`` (policies, critics, optimisers), ``critics`` (TD and
Monte-Carlo critic training), ``algos`` (gradient estimators, safety layer),
``training`` (the combined training loop), ``oracle`` (exact tabular solutions),
``checks`` (oracle-vs-estimator property suites) and ``harness``/``cli``.
"""

from .algos import SampleBatch, SafetyLayer, SuppressionConfig
from .approx import CriticSet, ParamVector
from .core import CmdpSpec, ConstraintSpec, Step, Trajectory
from .envs import HazardGrid, HazardGridConfig, Obstacle, PointNav2D, PointNav2DConfig
from .training import Agent, TrainConfig, derive_seed, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "Agent",
    "CmdpSpec",
    "ConstraintSpec",
    "CriticSet",
    "HazardGrid",
    "HazardGridConfig",
    "Obstacle",
    "ParamVector",
    "PointNav2D",
    "PointNav2DConfig",
    "SafetyLayer",
    "SampleBatch",
    "Step",
    "SuppressionConfig",
    "TrainConfig",
    "Trajectory",
    "derive_seed",
    "evaluate",
    "train",
]
