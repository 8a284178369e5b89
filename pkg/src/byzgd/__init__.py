"""Byzantine fault-tolerant distributed gradient descent for linear regression.

Norm filtering and norm-cap filtering aggregation rules, simulated
adversaries, bounded-delay asynchrony, and the constants/thresholds that
govern convergence.
"""

from byzgd.core import (
    AgentData,
    ConstraintBox,
    NoiseModel,
    Problem,
    cost,
    gradient,
    synthesize_problem,
)
from byzgd.filters import FilterKind, GradientReport, aggregate, sort_by_norm

__all__ = [
    "AgentData",
    "ConstraintBox",
    "FilterKind",
    "GradientReport",
    "NoiseModel",
    "Problem",
    "aggregate",
    "cost",
    "gradient",
    "sort_by_norm",
    "synthesize_problem",
]

__version__ = "0.1.0"
