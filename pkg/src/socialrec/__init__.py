"""Closed-loop simulator of networked users, adaptive content creators,
and a configurable recommender system."""

from .config import ExperimentConfig, GraphSource
from .dynamics import (
    CreatorPopulation,
    Partition,
    Trajectory,
    UserPopulation,
    build_partition,
    creator_step,
    simulate,
    user_step,
)
from .graph import SocialGraph
from .recommender import RecommenderConfig
from .synthgen import ParameterBounds

__all__ = [
    "CreatorPopulation",
    "ExperimentConfig",
    "GraphSource",
    "ParameterBounds",
    "Partition",
    "RecommenderConfig",
    "SocialGraph",
    "Trajectory",
    "UserPopulation",
    "build_partition",
    "creator_step",
    "simulate",
    "user_step",
]

__version__ = "0.1.0"
