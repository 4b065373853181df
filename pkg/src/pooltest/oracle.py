"""Brute-force references for checking the solver on small instances.

Nothing here shares code with the solver's label machinery: partitions are
enumerated explicitly and scored group by group through the closed forms
in :mod:`pooltest.metrics`, or by summing over every true-status vector.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from pooltest.errors import InstanceTooLarge
from pooltest.metrics import risks_metrics
from pooltest.model import (
    DesignConfig,
    Group,
    Partition,
    Population,
    TestCharacteristics,
    partition_from_sizes,
)

ORDERED_MAX_N = 20
ALL_PARTITIONS_MAX_N = 10
TREE_MAX_N = 12
TIE_TOL = 1e-9


@dataclass(frozen=True)
class OracleReport:
    best_objective: float
    best_partition: Optional[Partition]
    candidates_examined: int
    ties: int
    best_blocks: tuple[tuple[int, ...], ...] = ()
    best_tests: float = math.nan

    @property
    def feasible(self) -> bool:
        return self.best_partition is not None or bool(self.best_blocks)


def compositions(n: int, max_part: int) -> Iterator[tuple[int, ...]]:
    """All compositions of ``n`` with parts <= ``max_part``, via bitmasks over the n-1 cut points."""
    for mask in range(1 << (n - 1)):
        sizes = []
        run = 1
        for bit in range(n - 1):
            if mask >> bit & 1:
                sizes.append(run)
                run = 1
            else:
                run += 1
        sizes.append(run)
        if max(sizes) <= max_part:
            yield tuple(sizes)


def set_partitions(n: int) -> Iterator[list[int]]:
    """Restricted growth strings of length ``n``: a[0] = 0, a[k] <= 1 + max(a[:k])."""
    if n == 0:
        return
    a = [0] * n
    b = [1] * n  # b[k] = 1 + max(a[:k]); b[0] is unused
    while True:
        yield list(a)
        k = n - 1
        while k > 0 and a[k] == b[k]:
            k -= 1
        if k == 0:
            return
        a[k] += 1
        for m in range(k + 1, n):
            a[m] = 0
            b[m] = max(b[m - 1], a[m - 1] + 1)


def _blocks_from_rgs(rgs: Sequence[int]) -> list[list[int]]:
    blocks: list[list[int]] = [[] for _ in range(max(rgs) + 1)]
    for idx, block in enumerate(rgs):
        blocks[block].append(idx)
    return blocks


def _evaluate(blocks_risks, tc, lam):
    objective = tests = 0.0
    for risks in blocks_risks:
        m = risks_metrics(risks, tc, lam)
        objective += m.cost
        tests += m.expected_tests
    return objective, tests


def enumerate_ordered_optimum(
    population: Population, tc: TestCharacteristics, config: DesignConfig
) -> OracleReport:
    """Exact optimum over every ordered partition meeting the size cap and budget."""
    n = len(population)
    if n > ORDERED_MAX_N:
        raise InstanceTooLarge(f"ordered enumeration is capped at N={ORDERED_MAX_N}, got {n}")
    risks = population.risks
    scored = []
    examined = 0
    for sizes in compositions(n, config.max_group_size):
        examined += 1
        bounds = list(itertools.accumulate(sizes, initial=0))
        objective, tests = _evaluate(
            (risks[a:b] for a, b in zip(bounds, bounds[1:])), tc, config.lam
        )
        if tests <= config.budget + TIE_TOL:
            scored.append((objective, tests, sizes))
    if not scored:
        return OracleReport(math.inf, None, examined, 0)
    best_obj, best_tests, best_sizes = min(scored, key=lambda x: x[0])
    ties = sum(1 for obj, _, _ in scored if obj - best_obj <= TIE_TOL)
    partition = partition_from_sizes(population, best_sizes)
    bounds = list(itertools.accumulate(best_sizes, initial=0))
    blocks = tuple(tuple(range(a, b)) for a, b in zip(bounds, bounds[1:]))
    return OracleReport(best_obj, partition, examined, ties, blocks, best_tests)


def enumerate_all_partitions_optimum(
    population: Population, tc: TestCharacteristics, config: DesignConfig
) -> OracleReport:
    """Exact optimum over all set partitions, contiguous or not.

    ``best_blocks`` holds 0-based subject positions of the optimum;
    ``best_partition`` is filled only when those blocks happen to be
    contiguous intervals.
    """
    n = len(population)
    if n > ALL_PARTITIONS_MAX_N:
        raise InstanceTooLarge(
            f"set-partition enumeration is capped at N={ALL_PARTITIONS_MAX_N}, got {n}"
        )
    risks = population.risks
    best = None
    scored_objectives = []
    examined = 0
    for rgs in set_partitions(n):
        blocks = _blocks_from_rgs(rgs)
        if max(len(b) for b in blocks) > config.max_group_size:
            continue
        examined += 1
        objective, tests = _evaluate(([risks[i] for i in b] for b in blocks), tc, config.lam)
        if tests > config.budget + TIE_TOL:
            continue
        scored_objectives.append(objective)
        if best is None or objective < best[0]:
            best = (objective, tests, blocks)
    if best is None:
        return OracleReport(math.inf, None, examined, 0)
    best_obj, best_tests, blocks = best
    ties = sum(1 for obj in scored_objectives if obj - best_obj <= TIE_TOL)
    ordered_blocks = tuple(sorted(tuple(b) for b in blocks))
    partition = None
    if all(b == tuple(range(b[0], b[-1] + 1)) for b in ordered_blocks):
        partition = partition_from_sizes(population, [len(b) for b in ordered_blocks])
    return OracleReport(best_obj, partition, examined, ties, ordered_blocks, best_tests)


def exact_group_expectations(
    group: Group | Sequence[float], tc: TestCharacteristics, *, expand_retests: bool = False
) -> tuple[float, float, float]:
    """Expected (false negatives, false positives, tests) by summing the probability tree.

    Every true-status vector is weighted by its probability. Given the
    statuses, the pooled test is positive with probability Se if any member
    is infected and 1-Sp otherwise. With ``expand_retests`` every retest
    outcome vector is enumerated too; otherwise retests are handled through
    per-member conditional expectations, which is exact as well.
    """
    risks = list(group.risks) if isinstance(group, Group) else [float(p) for p in group]
    n = len(risks)
    if n == 0:
        raise ValueError("a group needs at least one member")
    if n > TREE_MAX_N:
        raise InstanceTooLarge(f"probability tree is capped at n={TREE_MAX_N}, got {n}")
    se, sp = tc.se, tc.sp
    e_fn = e_fp = e_tests = 0.0
    for status in itertools.product((0, 1), repeat=n):
        w = 1.0
        for p, s in zip(risks, status):
            w *= p if s else 1.0 - p
        if w == 0.0:
            continue
        positives = sum(status)
        if n == 1:
            fn = (1.0 - se) * positives
            fp = (1.0 - sp) * (1 - positives)
            tests = 1.0
        elif expand_retests:
            fn, fp, tests = _expanded_branch(status, se, sp)
        else:
            g = se if positives else 1.0 - sp
            # negative pool: every infected member is missed;
            # positive pool: retest misses with prob 1-Se, false alarms with prob 1-Sp
            fn = positives * ((1.0 - g) + g * (1.0 - se))
            fp = (n - positives) * g * (1.0 - sp)
            tests = 1.0 + g * n
        e_fn += w * fn
        e_fp += w * fp
        e_tests += w * tests
    return e_fn, e_fp, e_tests


def _expanded_branch(status, se, sp):
    n = len(status)
    any_pos = any(status)
    g = se if any_pos else 1.0 - sp
    fn = fp = tests = 0.0
    # pooled test negative: all cleared, one test used
    fn += (1.0 - g) * sum(status)
    tests += (1.0 - g) * 1.0
    # pooled test positive: enumerate each member's retest result
    for outcome in itertools.product((0, 1), repeat=n):
        w = g
        n_fn = n_fp = 0
        for s, o in zip(status, outcome):
            if s:
                w *= se if o else 1.0 - se
                n_fn += 1 - o
            else:
                w *= 1.0 - sp if o else sp
                n_fp += o
        fn += w * n_fn
        fp += w * n_fp
        tests += w * (1 + n)
    return fn, fp, tests


def milp_optimum(
    population: Population, tc: TestCharacteristics, config: DesignConfig
) -> tuple[float, Optional[tuple[int, ...]]]:
    """Optimum over ordered partitions as a 0/1 path program solved by HiGHS.

    Gives an exact reference at sizes where enumeration is hopeless. Binary
    arc variables carry one unit of flow from node 1 to node N+1 under the
    budget row. Returns (objective, group sizes) or (inf, None).
    """
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import coo_matrix

    n = len(population)
    L = min(config.max_group_size, n)
    risks = population.risks
    arcs, cost, tests = [], [], []
    for i in range(1, n + 1):
        for k in range(1, min(L, n - i + 1) + 1):
            m = risks_metrics(risks[i - 1 : i - 1 + k], tc, config.lam)
            if m.expected_tests > config.budget + TIE_TOL:
                continue
            arcs.append((i, i + k))
            cost.append(m.cost)
            tests.append(m.expected_tests)
    if not arcs:
        return math.inf, None
    n_arcs = len(arcs)
    rows, cols, vals = [], [], []
    for a, (i, j) in enumerate(arcs):
        rows += [i - 1, j - 1]
        cols += [a, a]
        vals += [-1.0, 1.0]
    flow = coo_matrix((vals, (rows, cols)), shape=(n + 1, n_arcs)).tocsr()
    rhs = np.zeros(n + 1)
    rhs[0] = -1.0
    rhs[n] = 1.0
    constraints = [
        LinearConstraint(flow, rhs, rhs),
        LinearConstraint(np.array(tests)[None, :], -np.inf, config.budget + TIE_TOL),
    ]
    res = milp(
        np.array(cost),
        constraints=constraints,
        integrality=np.ones(n_arcs),
        bounds=Bounds(0, 1),
        options={"mip_rel_gap": 1e-12},
    )
    if res.status != 0 or res.x is None:
        return math.inf, None
    chosen = sorted(arcs[a] for a in np.flatnonzero(res.x > 0.5))
    sizes = tuple(j - i for i, j in chosen)
    bounds = list(itertools.accumulate(sizes, initial=0))
    objective = sum(
        risks_metrics(risks[a:b], tc, config.lam).cost for a, b in zip(bounds, bounds[1:])
    )
    return objective, sizes
