"""Synthetic town contact networks and epidemic scenario experiments."""

__version__ = "0.1.0"

from .params import LayerKind, ModelParams, default_params, load_params, validate
from .generator import TownNetwork, generate, union_structure
from .metrics import distance_stats, average_clustering, select_seed
from .sir import SirOutcome, simulate_sir
from .experiment import (
    DEFAULT_BETAS,
    DEFAULT_SCENARIOS,
    run_attribute_table,
    run_scenario_sweep,
    run_sensitivity,
    scenario_layers,
)

__all__ = [
    "LayerKind", "ModelParams", "default_params", "load_params", "validate",
    "TownNetwork", "generate", "union_structure",
    "distance_stats", "average_clustering", "select_seed",
    "SirOutcome", "simulate_sir",
    "DEFAULT_BETAS", "DEFAULT_SCENARIOS", "run_attribute_table",
    "run_scenario_sweep", "run_sensitivity", "scenario_layers",
]
