"""Monte Carlo replication of two-stage pooled screening.

Replications are split into fixed-size chunks, each with its own child
seed spawned from the user seed, so a report depends only on
(partition, tc, replications, seed) and chunks could run on separate
workers and be merged through their sums and sums of squares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from pooltest.metrics import expected_fn_group, expected_fp_group, expected_tests_group
from pooltest.model import Partition, TestCharacteristics

CHUNK = 50_000


@dataclass(frozen=True)
class SimulationReport:
    replications: int
    mean_fn: float
    mean_fp: float
    mean_tests: float
    stderr_fn: float
    stderr_fp: float
    stderr_tests: float
    seed: int

    @property
    def means(self) -> tuple[float, float, float]:
        return self.mean_fn, self.mean_fp, self.mean_tests

    @property
    def stderrs(self) -> tuple[float, float, float]:
        return self.stderr_fn, self.stderr_fp, self.stderr_tests


def _simulate_chunk(risks_by_group, tc: TestCharacteristics, reps: int, rng: np.random.Generator):
    """Per-replication FN, FP and test counts for ``reps`` replications."""
    fn = np.zeros(reps)
    fp = np.zeros(reps)
    tests = np.zeros(reps)
    for risks in risks_by_group:
        n = len(risks)
        infected = rng.random((reps, n)) < risks
        if n == 1:
            positive = np.where(infected, rng.random((reps, 1)) < tc.se, rng.random((reps, 1)) >= tc.sp)
            tests += 1.0
        else:
            any_inf = infected.any(axis=1)
            u = rng.random(reps)
            pool_pos = np.where(any_inf, u < tc.se, u >= tc.sp)
            retest = rng.random((reps, n))
            individual = np.where(infected, retest < tc.se, retest >= tc.sp)
            positive = individual & pool_pos[:, None]
            tests += 1.0 + n * pool_pos
        fn += (infected & ~positive).sum(axis=1)
        fp += (~infected & positive).sum(axis=1)
    return fn, fp, tests


def simulate_partition(
    partition: Partition, tc: TestCharacteristics, replications: int, seed: int
) -> SimulationReport:
    if replications < 1:
        raise ValueError("replications must be >= 1")
    risks_by_group = [np.asarray(g.risks, dtype=float) for g in partition.groups]
    n_chunks = math.ceil(replications / CHUNK)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    sums = np.zeros(3)
    sumsq = np.zeros(3)
    remaining = replications
    for child in children:
        reps = min(CHUNK, remaining)
        remaining -= reps
        fn, fp, tests = _simulate_chunk(risks_by_group, tc, reps, np.random.default_rng(child))
        for k, x in enumerate((fn, fp, tests)):
            sums[k] += x.sum()
            sumsq[k] += np.dot(x, x)
    means = sums / replications
    if replications > 1:
        var = np.maximum(sumsq - replications * means**2, 0.0) / (replications - 1)
        stderr = np.sqrt(var / replications)
    else:
        stderr = np.zeros(3)
    return SimulationReport(
        replications,
        float(means[0]),
        float(means[1]),
        float(means[2]),
        float(stderr[0]),
        float(stderr[1]),
        float(stderr[2]),
        seed,
    )


def analytic_expectations(partition: Partition, tc: TestCharacteristics) -> tuple[float, float, float]:
    fn = sum(expected_fn_group(g, tc) for g in partition.groups)
    fp = sum(expected_fp_group(g, tc) for g in partition.groups)
    tests = sum(expected_tests_group(g, tc) for g in partition.groups)
    return fn, fp, tests


def compare_to_analytic(
    partition: Partition,
    tc: TestCharacteristics,
    replications: int,
    seed: int,
    z: float = 4.0,
    analytic: Optional[tuple[float, float, float]] = None,
) -> tuple[bool, SimulationReport]:
    """True when every empirical mean lies within ``z`` standard errors of its expectation.

    ``analytic`` overrides the closed-form expectations.
    """
    if z <= 0:
        raise ValueError("z must be positive")
    report = simulate_partition(partition, tc, replications, seed)
    expected = analytic if analytic is not None else analytic_expectations(partition, tc)
    # the 1e-9 slack covers zero-variance cases, where mean and expectation agree to rounding
    ok = all(
        abs(mean - target) <= z * se + 1e-9
        for mean, target, se in zip(report.means, expected, report.stderrs)
    )
    return ok, report
