"""Causal Bayesian reasoning for block stacking under perception and actuation noise."""

from .physics import Block, StabilityVerdict, TowerState, contact_region, is_stable, settle
from .ppl import enumerate_query, importance_query, run_model
from .task_model import Action, NoiseParams, Observation, TaskState

__all__ = [
    "Action",
    "Block",
    "NoiseParams",
    "Observation",
    "StabilityVerdict",
    "TaskState",
    "TowerState",
    "contact_region",
    "enumerate_query",
    "importance_query",
    "is_stable",
    "run_model",
    "settle",
]
__version__ = "0.1.0"
