"""Group testing design: risk-ordered pooling under size and test-budget limits."""

from pooltest.model import (
    DesignConfig,
    Group,
    Partition,
    PartitionMetrics,
    Population,
    Subject,
    TestCharacteristics,
    validate_population,
)
from pooltest.solver import SolveResult, minimum_feasible_budget, solve

__all__ = [
    "DesignConfig",
    "Group",
    "Partition",
    "PartitionMetrics",
    "Population",
    "SolveResult",
    "Subject",
    "TestCharacteristics",
    "minimum_feasible_budget",
    "solve",
    "validate_population",
]

__version__ = "0.1.0"
