"""Hinge-loss MRF recommender with group-fairness rules.

The pieces fit together as rule templates (:mod:`fairpsl.rulekit`) grounded
over a ratings dataset (:mod:`fairpsl.dataio`) and kNN similarity graphs
(:mod:`fairpsl.simgraph`), solved by consensus ADMM (:mod:`fairpsl.solver`) and
scored with accuracy and unfairness metrics (:mod:`fairpsl.metrics`).
"""

from .fairness import FairnessSpec
from .metrics import MetricsReport, evaluate
from .model import ModelSpec
from .pipeline import FoldResult, predict, run_fold
from .rulekit import GroundPotential, PotentialSet, parse_rule, parse_rules
from .solver import SolverConfig, map_inference

__version__ = "0.1.0"

__all__ = [
    "FairnessSpec", "FoldResult", "GroundPotential", "MetricsReport", "ModelSpec", "PotentialSet",
    "SolverConfig", "evaluate", "map_inference", "parse_rule", "parse_rules", "predict", "run_fold",
]
