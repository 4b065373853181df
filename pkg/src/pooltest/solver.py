"""Constrained shortest path over the implicit group DAG.

Node ``j`` (1..N+1) stands for "subjects 1..j-1 are already assigned";
arc ``(i, j)`` pools subjects ``i..j-1``. Every node keeps a Pareto
frontier of labels (cost, expected tests) and nodes are processed in
topological order, so each frontier is final once its node is reached.

Two engines produce identical frontiers:

* the default vectorised engine merges all candidate labels of a node at
  once with a stable lexicographic sort;
* ``checked=True`` inserts candidates one at a time through
  :func:`extend_and_dominance` and asserts the frontier invariant after
  every insertion that changes a frontier.
"""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field
from operator import attrgetter
from typing import Optional

import numpy as np

from pooltest.errors import CorruptChain, NoFeasibleBudget
from pooltest.metrics import ArcTable, arc_table, partition_metrics, single_group_budget_estimate
from pooltest.model import (
    DesignConfig,
    Partition,
    PartitionMetrics,
    Population,
    TestCharacteristics,
    partition_from_boundaries,
)

log = logging.getLogger(__name__)

BUDGET_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Label:
    """Path state: predecessor label, the node it lives at, cost and resource so far."""

    pred: Optional["Label"]
    pred_node: Optional[int]
    cost: float
    resource: float

    def __repr__(self):
        return f"Label(pred_node={self.pred_node}, cost={self.cost!r}, resource={self.resource!r})"


ROOT = Label(None, None, 0.0, 0.0)


def dominates(a: Label, b: Label) -> bool:
    return a.cost <= b.cost and a.resource <= b.resource


def is_pareto_frontier(labels) -> bool:
    """Strictly increasing cost and strictly decreasing resource."""
    return all(a.cost < b.cost and a.resource > b.resource for a, b in zip(labels, labels[1:]))


_cost_key = attrgetter("cost")


def _insert(frontier: list[Label], candidate: Label) -> bool:
    c, r = candidate.cost, candidate.resource
    # labels with cost <= c form a prefix; its last element has the smallest resource
    k = bisect.bisect_right(frontier, c, key=_cost_key)
    if k > 0 and frontier[k - 1].resource <= r:
        return False
    lo = bisect.bisect_left(frontier, c, key=_cost_key)
    hi = lo
    while hi < len(frontier) and frontier[hi].resource >= r:
        hi += 1
    frontier[lo:hi] = [candidate]
    return True


def extend_and_dominance(frontier: list[Label], candidate: Label) -> list[Label]:
    """Insert ``candidate`` into a Pareto frontier unless an existing label dominates it.

    Labels the candidate dominates are removed. An exact duplicate of an
    existing label is discarded (the incumbent wins). The list is modified
    in place and returned.
    """
    _insert(frontier, candidate)
    return frontier


@dataclass
class SolveResult:
    partition: Partition
    metrics: Optional[PartitionMetrics]
    label_counts: list[int]
    feasible: bool
    sink_label: Optional[Label] = None
    config: Optional[DesignConfig] = None
    frontiers: Optional[list] = field(default=None, repr=False)

    @property
    def objective(self) -> float:
        return self.metrics.objective if self.metrics is not None else math.inf

    @property
    def n_groups(self) -> int:
        return len(self.partition.groups)


class _ArrayFrontier:
    __slots__ = ("cost", "resource", "pred_node", "pred_pos")

    def __init__(self, cost, resource, pred_node, pred_pos):
        self.cost = cost
        self.resource = resource
        self.pred_node = pred_node
        self.pred_pos = pred_pos

    def __len__(self):
        return len(self.cost)


def _solve_arrays(n: int, table: ArcTable, L: int, budget: float) -> list[_ArrayFrontier]:
    limit = budget + BUDGET_TOL
    empty_f = np.empty(0)
    empty_i = np.empty(0, dtype=np.int64)
    fronts: list[Optional[_ArrayFrontier]] = [None] * (n + 2)
    fronts[1] = _ArrayFrontier(np.zeros(1), np.zeros(1), np.array([-1]), np.array([-1]))
    aranges = {}
    for j in range(2, n + 2):
        cs, rs, nodes, poss = [], [], [], []
        for i in range(max(1, j - L), j):
            f = fronts[i]
            m = len(f)
            if m == 0:
                continue
            c_ij, r_ij = table.arc(i, j)
            if r_ij > limit:
                continue
            cs.append(f.cost + c_ij)
            rs.append(f.resource + r_ij)
            nodes.append(np.full(m, i))
            pos = aranges.get(m)
            if pos is None:
                pos = aranges[m] = np.arange(m)
            poss.append(pos)
        if not cs:
            fronts[j] = _ArrayFrontier(empty_f, empty_f, empty_i, empty_i)
            continue
        cost = np.concatenate(cs)
        res = np.concatenate(rs)
        node = np.concatenate(nodes)
        pos = np.concatenate(poss)
        ok = res <= limit
        if not ok.all():
            cost, res, node, pos = cost[ok], res[ok], node[ok], pos[ok]
        if len(cost) == 0:
            fronts[j] = _ArrayFrontier(empty_f, empty_f, empty_i, empty_i)
            continue
        # stable: among exact duplicates the earliest candidate survives
        order = np.lexsort((res, cost))
        cost, res, node, pos = cost[order], res[order], node[order], pos[order]
        keep = np.empty(len(res), dtype=bool)
        keep[0] = True
        keep[1:] = res[1:] < np.minimum.accumulate(res)[:-1]
        fronts[j] = _ArrayFrontier(cost[keep], res[keep], node[keep], pos[keep])
    return fronts


def _rebuild(chain) -> Label:
    # chain runs sink -> root as (cost, resource, pred_node)
    label: Optional[Label] = None
    for cost, res, pred_node in reversed(chain):
        label = Label(label, pred_node if pred_node >= 1 else None, float(cost), float(res))
    assert label is not None
    return label


def _solve_checked(n: int, table: ArcTable, L: int, budget: float) -> list[list[Label]]:
    limit = budget + BUDGET_TOL
    fronts: list[list[Label]] = [[] for _ in range(n + 2)]
    fronts[1] = [ROOT]
    for j in range(2, n + 2):
        frontier = fronts[j]
        for i in range(max(1, j - L), j):
            c_ij, r_ij = table.arc(i, j)
            if r_ij > limit:
                continue
            for label in fronts[i]:
                r = label.resource + r_ij
                if r <= limit:
                    inserted = _insert(frontier, Label(label, i, label.cost + c_ij, r))
                    # a rejected candidate leaves the frontier untouched
                    if inserted and not is_pareto_frontier(frontier):
                        raise AssertionError(f"Pareto invariant violated at node {j}")
    return fronts


def recover_partition(population: Population, sink_label: Label) -> Partition:
    """Walk predecessor references from a sink label back to node 1.

    The nodes visited are the first subjects of the groups, so consecutive
    nodes delimit each group; the artificial sink closes the last one.
    """
    n = len(population)
    nodes = [n + 1]
    label = sink_label
    steps = 0
    while label.pred is not None:
        if label.pred_node is None:
            raise CorruptChain("label has a predecessor but no predecessor node")
        nodes.append(label.pred_node)
        label = label.pred
        steps += 1
        if steps > n:
            raise CorruptChain("predecessor chain is longer than the population")
    if nodes[-1] != 1:
        raise CorruptChain(f"predecessor chain ends at node {nodes[-1]}, not 1")
    nodes.reverse()
    if any(b <= a for a, b in zip(nodes, nodes[1:])):
        raise CorruptChain(f"predecessor nodes are not increasing: {nodes}")
    return partition_from_boundaries(population, nodes)


def solve(
    population: Population,
    tc: TestCharacteristics,
    config: DesignConfig,
    *,
    checked: bool = False,
    keep_frontiers: bool = False,
    table: Optional[ArcTable] = None,
) -> SolveResult:
    """Minimum-objective ordered partition under the size cap and test budget.

    Infeasibility is reported through ``SolveResult.feasible``. ``table``
    may be passed to reuse arc metrics across budgets; it must have been
    built for the same population, test characteristics, lambda and L.
    """
    n = len(population)
    L = min(config.max_group_size, n)
    if table is None:
        table = arc_table(population, tc, config.lam, L)
    if checked:
        fronts = _solve_checked(n, table, L, config.budget)
        counts = [len(f) for f in fronts[1:]]
        sink = fronts[n + 1][0] if fronts[n + 1] else None
    else:
        afronts = _solve_arrays(n, table, L, config.budget)
        counts = [len(f) for f in afronts[1:]]
        sink = _rebuild_from_arrays(afronts, n + 1, 0) if len(afronts[n + 1]) else None
        fronts = afronts
    if sink is None:
        return SolveResult(
            Partition(()), None, counts, False, None, config, fronts if keep_frontiers else None
        )
    partition = recover_partition(population, sink)
    metrics = partition_metrics(partition, tc, config.lam)
    return SolveResult(
        Partition(partition.groups, metrics),
        metrics,
        counts,
        True,
        sink,
        config,
        fronts if keep_frontiers else None,
    )


def _rebuild_from_arrays(fronts: list[_ArrayFrontier], node: int, pos: int) -> Label:
    chain = []
    while node >= 1:
        f = fronts[node]
        pred_node = int(f.pred_node[pos])
        chain.append((f.cost[pos], f.resource[pos], pred_node))
        node, pos = pred_node, int(f.pred_pos[pos])
    return _rebuild(chain)


def frontier_labels(result: SolveResult, node: int) -> list[tuple[float, float]]:
    """(cost, resource) pairs of a node's final frontier; needs ``keep_frontiers=True``."""
    if result.frontiers is None:
        raise ValueError("solve was run without keep_frontiers=True")
    f = result.frontiers[node]
    if isinstance(f, list):
        return [(x.cost, x.resource) for x in f]
    return list(zip(f.cost.tolist(), f.resource.tolist()))


def expected_gain_percent(n: int, b_min: float) -> float:
    """Test saving of a budget relative to screening all ``n`` subjects individually."""
    if n < 1:
        raise ValueError("n must be positive")
    return 100.0 * (n - b_min) / n


@dataclass
class BudgetSearch:
    budget: int
    result: SolveResult
    probes: list[tuple[int, bool]]

    def __iter__(self):
        # allows ``b_min, result = minimum_feasible_budget(...)``
        return iter((self.budget, self.result))


def minimum_feasible_budget(
    population: Population,
    tc: TestCharacteristics,
    lam: float,
    max_group_size: int,
    *,
    linear_scan: bool = False,
) -> BudgetSearch:
    """Smallest integer budget for which a feasible partition exists.

    The default binary search brackets the answer between ceil(N/L) (each
    group needs at least one test) and N-1, starting from the expected
    tests of one all-encompassing pool. ``linear_scan`` instead decrements
    from N-1 until the solver fails, one solve per budget.
    """
    n = len(population)
    if n < 2:
        raise ValueError("budget search needs at least two subjects")
    L = min(max_group_size, n)
    table = arc_table(population, tc, lam, L)
    probes: list[tuple[int, bool]] = []
    cache: dict[int, SolveResult] = {}

    def run(b: int) -> SolveResult:
        if b not in cache:
            cache[b] = solve(population, tc, DesignConfig(lam, max_group_size, b), table=table)
            probes.append((b, cache[b].feasible))
        return cache[b]

    top = n - 1
    if not run(top).feasible:
        raise NoFeasibleBudget(
            f"no partition with at most {top} expected tests exists (L={max_group_size})"
        )

    if linear_scan:
        b = top
        while b - 1 >= 0 and run(b - 1).feasible:
            b -= 1
        return BudgetSearch(b, cache[b], probes)

    lo = max(1, math.ceil(n / L)) - 1  # infeasible sentinel
    start = min(top, math.ceil(single_group_budget_estimate(population, tc)))
    if start > lo:
        if run(start).feasible:
            hi = start
        else:
            lo, hi = start, top
    else:
        hi = top
    # invariant: lo infeasible (or below every feasible budget), hi feasible
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if run(mid).feasible:
            hi = mid
        else:
            lo = mid
    log.debug("budget search probes: %s", probes)
    return BudgetSearch(hi, cache[hi], probes)
