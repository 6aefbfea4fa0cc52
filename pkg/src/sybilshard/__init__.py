"""Feasibility analysis of Sybil attacks on shard-based permissionless blockchains."""
from .analytics import (
    AttackProbability,
    MCConfig,
    SelectionDistribution,
    ThresholdProbability,
    attack_probability,
    exact_attack_probability_oracle,
    per_shard_threshold_closed,
    per_shard_threshold_mc,
    selection_pmf,
)
from .protocol import ProtocolParams, ThresholdSpec, make_params, resolve_threshold, validate_params
from .sim import EpochOutcome, SimulationReport, exhaustive_epoch_distribution, run_epoch, run_trials

__version__ = "0.1.0"

__all__ = [
    "AttackProbability", "MCConfig", "SelectionDistribution", "ThresholdProbability",
    "attack_probability", "exact_attack_probability_oracle", "per_shard_threshold_closed",
    "per_shard_threshold_mc", "selection_pmf", "ProtocolParams", "ThresholdSpec", "make_params",
    "resolve_threshold", "validate_params", "EpochOutcome", "SimulationReport",
    "exhaustive_epoch_distribution", "run_epoch", "run_trials",
]
