"""Domain types for the group testing design problem.

Subjects are indexed 1..N in non-decreasing order of risk; a partition is
a sequence of contiguous groups of that ordering.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

from pooltest.errors import EmptyPopulation, IndexOutOfRange, RiskOutOfRange


def _is_probability(x: float) -> bool:
    return isinstance(x, (int, float)) and not math.isnan(x) and 0.0 <= x <= 1.0


@dataclass(frozen=True)
class Subject:
    id: str
    risk: float

    def __post_init__(self):
        if not _is_probability(self.risk):
            raise RiskOutOfRange(self.id, self.risk)
        object.__setattr__(self, "risk", float(self.risk))


@dataclass(frozen=True)
class Population:
    """Risk-ordered, non-empty sequence of subjects.

    Build one with :func:`validate_population` when the input is unsorted.
    """

    subjects: tuple[Subject, ...]

    def __post_init__(self):
        subjects = tuple(self.subjects)
        if not subjects:
            raise EmptyPopulation("population must contain at least one subject")
        for a, b in zip(subjects, subjects[1:]):
            if b.risk < a.risk:
                raise ValueError(
                    f"subjects must be sorted by non-decreasing risk ({a.id!r} > {b.id!r})"
                )
        object.__setattr__(self, "subjects", subjects)

    def __len__(self) -> int:
        return len(self.subjects)

    def __iter__(self) -> Iterator[Subject]:
        return iter(self.subjects)

    def __getitem__(self, index):
        return self.subjects[index]

    @property
    def risks(self) -> tuple[float, ...]:
        return tuple(s.risk for s in self.subjects)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.subjects)

    def subject(self, index: int) -> Subject:
        """Subject at 1-based position ``index``."""
        if not 1 <= index <= len(self.subjects):
            raise IndexOutOfRange(f"subject index {index} outside [1, {len(self.subjects)}]")
        return self.subjects[index - 1]

    def group(self, start_index: int, size: int) -> "Group":
        """The contiguous group of ``size`` subjects starting at 1-based ``start_index``."""
        n = len(self.subjects)
        if size < 1 or start_index < 1 or start_index + size - 1 > n:
            raise IndexOutOfRange(
                f"group [{start_index}, {start_index + size - 1}] outside [1, {n}]"
            )
        return Group(start_index, self.subjects[start_index - 1 : start_index - 1 + size])


def validate_population(subjects: Iterable[Subject]) -> Population:
    """Check risks and return the subjects as a risk-sorted population.

    The sort is stable, so subjects with equal risk keep their input order.
    """
    subjects = list(subjects)
    if not subjects:
        raise EmptyPopulation("population must contain at least one subject")
    for s in subjects:
        if not _is_probability(s.risk):
            raise RiskOutOfRange(s.id, s.risk)
    return Population(tuple(sorted(subjects, key=lambda s: s.risk)))


@dataclass(frozen=True)
class TestCharacteristics:
    se: float
    sp: float

    __test__ = False  # not a pytest class

    def __post_init__(self):
        for name in ("se", "sp"):
            value = getattr(self, name)
            if not _is_probability(value):
                raise ValueError(f"{name} must be a probability in [0, 1], got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.se + self.sp < 1.0:
            warnings.warn(
                f"Se + Sp = {self.se + self.sp:.4f} < 1: the assay is worse than a coin flip",
                RuntimeWarning,
                stacklevel=3,
            )


@dataclass(frozen=True)
class DesignConfig:
    """Objective weight ``lam`` on false negatives, pool size cap and expected-test budget."""

    lam: float
    max_group_size: int
    budget: float

    def __post_init__(self):
        if not _is_probability(self.lam):
            raise ValueError(f"lambda must be in [0, 1], got {self.lam!r}")
        if int(self.max_group_size) != self.max_group_size or self.max_group_size < 1:
            raise ValueError(f"max_group_size must be a positive integer, got {self.max_group_size!r}")
        if math.isnan(self.budget) or self.budget < 0:
            raise ValueError(f"budget must be non-negative, got {self.budget!r}")
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "max_group_size", int(self.max_group_size))
        object.__setattr__(self, "budget", float(self.budget))


@dataclass(frozen=True)
class Group:
    start_index: int
    members: tuple[Subject, ...]

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise ValueError("a group needs at least one member")
        if self.start_index < 1:
            raise IndexOutOfRange(f"start_index must be >= 1, got {self.start_index}")

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def end_index(self) -> int:
        """1-based index of the last member."""
        return self.start_index + len(self.members) - 1

    @property
    def risks(self) -> tuple[float, ...]:
        return tuple(s.risk for s in self.members)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.members)


@dataclass(frozen=True)
class PartitionMetrics:
    expected_fn: float
    expected_fp: float
    expected_tests: float
    objective: float


@dataclass(frozen=True)
class Partition:
    groups: tuple[Group, ...]
    metrics: Optional[PartitionMetrics] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        expected = 1
        for g in self.groups:
            if g.start_index != expected:
                raise ValueError(
                    f"groups must be contiguous and in order: expected start {expected}, got {g.start_index}"
                )
            expected = g.end_index + 1

    def __len__(self) -> int:
        return len(self.groups)

    def __iter__(self) -> Iterator[Group]:
        return iter(self.groups)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(g.size for g in self.groups)

    @property
    def boundaries(self) -> tuple[int, ...]:
        """Node indices visited by the partition's path: 1, start of each group, N+1."""
        if not self.groups:
            return ()
        return tuple(g.start_index for g in self.groups) + (self.groups[-1].end_index + 1,)

    @property
    def n_subjects(self) -> int:
        return sum(g.size for g in self.groups)

    @property
    def individual(self) -> tuple[Subject, ...]:
        """Subjects tested individually (groups of size 1)."""
        return tuple(g.members[0] for g in self.groups if g.size == 1)

    def covers(self, population: Population) -> bool:
        return tuple(s for g in self.groups for s in g.members) == population.subjects


def partition_from_sizes(population: Population, sizes: Sequence[int]) -> Partition:
    """Ordered partition of ``population`` with consecutive group sizes ``sizes``."""
    if sum(sizes) != len(population):
        raise ValueError(f"sizes sum to {sum(sizes)}, population has {len(population)} subjects")
    groups = []
    start = 1
    for size in sizes:
        groups.append(population.group(start, size))
        start += size
    return Partition(tuple(groups))


def partition_from_boundaries(population: Population, boundaries: Sequence[int]) -> Partition:
    """Ordered partition from path nodes ``1 = b_0 < b_1 < ... < b_k = N+1``."""
    b = list(boundaries)
    if len(b) < 2 or b[0] != 1 or b[-1] != len(population) + 1:
        raise ValueError(f"boundaries must run from 1 to {len(population) + 1}, got {b}")
    return partition_from_sizes(population, [hi - lo for lo, hi in zip(b, b[1:])])
