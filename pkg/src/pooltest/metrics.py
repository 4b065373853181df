"""Closed-form expectations for Dorfman two-stage pooling with an imperfect assay.

A group of size 1 is tested individually. A larger group gets one pooled
test; if it is positive every member is retested individually. Group and
retest outcomes are conditionally independent given true status.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from pooltest.errors import IndexOutOfRange
from pooltest.model import Group, Partition, PartitionMetrics, Population, TestCharacteristics


@dataclass(frozen=True)
class GroupMetrics:
    expected_fn: float
    expected_fp: float
    expected_tests: float
    cost: float

    @property
    def resource(self) -> float:
        return self.expected_tests


def _fn(n: int, sum_p: float, se: float) -> float:
    if n == 1:
        return (1.0 - se) * sum_p
    return (1.0 - se * se) * sum_p


def _fp(n: int, sum_p: float, prod_q: float, se: float, sp: float) -> float:
    sum_q = n - sum_p
    if n == 1:
        return (1.0 - sp) * sum_q
    return (1.0 - sp) * se * sum_q - n * (1.0 - sp) * (se + sp - 1.0) * prod_q


def _tests(n: int, prod_q: float, se: float, sp: float) -> float:
    if n == 1:
        return 1.0
    return 1.0 + n * (se - (se + sp - 1.0) * prod_q)


def _survival_product(risks: Sequence[float]) -> float:
    return math.prod(1.0 - p for p in risks)


def expected_fn_group(group: Group, tc: TestCharacteristics) -> float:
    return _fn(group.size, math.fsum(group.risks), tc.se)


def expected_fp_group(group: Group, tc: TestCharacteristics) -> float:
    risks = group.risks
    return _fp(len(risks), math.fsum(risks), _survival_product(risks), tc.se, tc.sp)


def expected_tests_group(group: Group, tc: TestCharacteristics) -> float:
    return _tests(group.size, _survival_product(group.risks), tc.se, tc.sp)


def risks_metrics(risks: Sequence[float], tc: TestCharacteristics, lam: float) -> GroupMetrics:
    """Metrics of a pool made of subjects with the given risks (order irrelevant)."""
    n = len(risks)
    if n == 0:
        raise ValueError("a group needs at least one member")
    sum_p = math.fsum(risks)
    prod_q = _survival_product(risks)
    fn = _fn(n, sum_p, tc.se)
    fp = _fp(n, sum_p, prod_q, tc.se, tc.sp)
    return GroupMetrics(fn, fp, _tests(n, prod_q, tc.se, tc.sp), lam * fn + (1.0 - lam) * fp)


def group_metrics(group: Group, tc: TestCharacteristics, lam: float) -> GroupMetrics:
    return risks_metrics(group.risks, tc, lam)


def arc_metrics(
    population: Population, i: int, j: int, tc: TestCharacteristics, lam: float
) -> GroupMetrics:
    """Cost and resource of arc (S_i, S_j): the group {S_i, ..., S_{j-1}}.

    Node N+1 is the artificial sink, so ``j`` may equal N+1.
    """
    n = len(population)
    if not (1 <= i < j <= n + 1):
        raise IndexOutOfRange(f"arc ({i}, {j}) requires 1 <= i < j <= {n + 1}")
    return group_metrics(population.group(i, j - i), tc, lam)


def partition_metrics(partition: Partition, tc: TestCharacteristics, lam: float) -> PartitionMetrics:
    fn = fp = tests = 0.0
    for g in partition.groups:
        m = group_metrics(g, tc, lam)
        fn += m.expected_fn
        fp += m.expected_fp
        tests += m.expected_tests
    return PartitionMetrics(fn, fp, tests, lam * fn + (1.0 - lam) * fp)


def with_metrics(partition: Partition, tc: TestCharacteristics, lam: float) -> Partition:
    return Partition(partition.groups, partition_metrics(partition, tc, lam))


def single_group_budget_estimate(population: Population, tc: TestCharacteristics) -> float:
    """Expected tests if all N subjects formed one pool; ignores the size cap."""
    return _tests(len(population), _survival_product(population.risks), tc.se, tc.sp)


@dataclass(frozen=True)
class ArcTable:
    """Cost and expected tests of every arc of length <= L.

    ``cost[i, k-1]`` and ``tests[i, k-1]`` belong to the group of size ``k``
    starting at 1-based node ``i``; row 0 is unused and out-of-range
    entries are NaN.
    """

    cost: np.ndarray
    tests: np.ndarray
    max_group_size: int

    def arc(self, i: int, j: int) -> tuple[float, float]:
        k = j - i
        return float(self.cost[i, k - 1]), float(self.tests[i, k - 1])


def arc_table(
    population: Population, tc: TestCharacteristics, lam: float, max_group_size: int
) -> ArcTable:
    """Tabulate arc costs by growing each group one subject at a time.

    Running sum of risks and survival product make each extension O(1).
    """
    risks = population.risks
    n = len(risks)
    width = min(max_group_size, n)
    cost = np.full((n + 1, width), np.nan)
    tests = np.full((n + 1, width), np.nan)
    se, sp = tc.se, tc.sp
    for i in range(1, n + 1):
        sum_p = 0.0
        prod_q = 1.0
        for k in range(1, min(width, n - i + 1) + 1):
            p = risks[i + k - 2]
            sum_p += p
            prod_q *= 1.0 - p
            fn = _fn(k, sum_p, se)
            fp = _fp(k, sum_p, prod_q, se, sp)
            cost[i, k - 1] = lam * fn + (1.0 - lam) * fp
            tests[i, k - 1] = _tests(k, prod_q, se, sp)
    return ArcTable(cost, tests, max_group_size)
