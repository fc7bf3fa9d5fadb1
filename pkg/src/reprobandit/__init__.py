"""Reproducible stochastic bandit policies and a paired-execution harness."""

from .environments import ActionSet, LinearEnvironment, MabEnvironment, RewardStream
from .shared_randomness import Purpose, SharedSeed, SubstreamKey, draw_uniform
from .trace import ExecutionTrace

__version__ = "0.1.0"

__all__ = [
    "ActionSet",
    "ExecutionTrace",
    "LinearEnvironment",
    "MabEnvironment",
    "Purpose",
    "RewardStream",
    "SharedSeed",
    "SubstreamKey",
    "draw_uniform",
]
