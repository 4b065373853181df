import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pooltest.errors import IndexOutOfRange
from pooltest.metrics import (
    arc_metrics,
    arc_table,
    expected_fn_group,
    expected_fp_group,
    expected_tests_group,
    group_metrics,
    partition_metrics,
    single_group_budget_estimate,
)
from pooltest.model import TestCharacteristics, partition_from_sizes
from pooltest.oracle import exact_group_expectations
from pooltest.simulator import compare_to_analytic

from conftest import make_population


def group_of(risks):
    return make_population(risks).group(1, len(risks))


TC75 = TestCharacteristics(0.75, 0.75)


# Expected values below come from exact_group_expectations(..., expand_retests=True)
# which enumerates every status vector and retest outcome.


class TestFalseNegatives:
    def test_individual(self):
        assert expected_fn_group(group_of([0.05]), TestCharacteristics(0.7, 0.95)) == pytest.approx(0.015, abs=1e-12)

    def test_perfect_sensitivity(self):
        assert expected_fn_group(group_of([0.05]), TestCharacteristics(1.0, 0.95)) == 0.0

    def test_pooled(self):
        assert expected_fn_group(group_of([0.06, 0.07, 0.08]), TC75) == pytest.approx(0.091875, abs=1e-12)


class TestFalsePositives:
    def test_individual(self):
        assert expected_fp_group(group_of([0.05]), TestCharacteristics(0.7, 0.95)) == pytest.approx(0.0475, abs=1e-12)

    def test_pair(self):
        assert expected_fp_group(group_of([0.04, 0.05]), TC75) == pytest.approx(0.130125, abs=1e-12)

    def test_perfect_test(self):
        assert expected_fp_group(group_of([0.0, 0.0]), TestCharacteristics(1, 1)) == 0.0


class TestExpectedTests:
    @pytest.mark.parametrize("p", [0.0, 0.3, 1.0])
    def test_individual_is_one(self, p):
        assert expected_tests_group(group_of([p]), TC75) == 1.0

    def test_triple(self):
        assert expected_tests_group(group_of([0.06, 0.07, 0.08]), TC75) == pytest.approx(2.043604, abs=1e-6)

    def test_perfect_test_all_negative(self):
        assert expected_tests_group(group_of([0.0, 0.0]), TestCharacteristics(1, 1)) == 1.0


class TestArcs:
    def test_fig1_first_four(self, fig1_population):
        m = arc_metrics(fig1_population, 1, 5, TC75, 0.6)
        assert m.cost == pytest.approx(0.13805995, abs=1e-5)
        assert m.resource == pytest.approx(2.19309952, abs=1e-5)

    def test_fig1_last_three(self, fig1_population):
        m = arc_metrics(fig1_population, 6, 9, TC75, 0.6)
        assert m.cost == pytest.approx(0.1437354, abs=1e-5)
        assert m.resource == pytest.approx(2.043604, abs=1e-5)

    @pytest.mark.parametrize("k", range(1, 9))
    def test_singleton_arcs(self, fig1_population, k):
        assert arc_metrics(fig1_population, k, k + 1, TC75, 0.6).resource == 1.0

    @pytest.mark.parametrize("i,j", [(0, 2), (3, 3), (5, 4), (1, 10)])
    def test_bad_indices(self, fig1_population, i, j):
        with pytest.raises(IndexOutOfRange):
            arc_metrics(fig1_population, i, j, TC75, 0.6)

    def test_table_matches_direct(self, fig1_population):
        table = arc_table(fig1_population, TC75, 0.6, 5)
        for i in range(1, 9):
            for j in range(i + 1, min(i + 5, 9) + 1):
                m = arc_metrics(fig1_population, i, j, TC75, 0.6)
                c, t = table.arc(i, j)
                assert c == pytest.approx(m.cost, abs=1e-14)
                assert t == pytest.approx(m.expected_tests, abs=1e-14)


class TestPartitions:
    def test_fig1_three_groups(self, fig1_population):
        m = partition_metrics(partition_from_sizes(fig1_population, [4, 2, 2]), TC75, 0.6)
        assert m.objective == pytest.approx(0.311, abs=1e-3)
        assert m.expected_tests == pytest.approx(5.444, abs=1e-3)

    def test_fig1_two_groups(self, fig1_population):
        # the two-group split; its numbers are easy to confuse with the optimum's
        m = partition_metrics(partition_from_sizes(fig1_population, [5, 3]), TC75, 0.6)
        assert m.objective == pytest.approx(0.332, abs=1e-3)
        assert m.expected_tests == pytest.approx(4.647, abs=1e-3)

    def test_all_singletons(self):
        pop = make_population([0.1, 0.2, 0.2, 0.6, 0.9])
        m = partition_metrics(partition_from_sizes(pop, [1] * 5), TC75, 0.3)
        assert m.expected_tests == 5.0

    def test_additivity(self, fig1_population):
        part = partition_from_sizes(fig1_population, [3, 1, 4])
        m = partition_metrics(part, TC75, 0.6)
        bounds = part.boundaries
        arcs = [arc_metrics(fig1_population, a, b, TC75, 0.6) for a, b in zip(bounds, bounds[1:])]
        assert m.objective == pytest.approx(sum(a.cost for a in arcs), abs=1e-9)
        assert m.expected_tests == pytest.approx(sum(a.resource for a in arcs), abs=1e-9)
        assert m.objective == pytest.approx(0.6 * m.expected_fn + 0.4 * m.expected_fp, abs=1e-9)
        assert m.expected_tests >= len(part)


class TestSingleGroupEstimate:
    def test_one_subject(self):
        assert single_group_budget_estimate(make_population([0.4]), TC75) == 1.0

    def test_fig1(self, fig1_population):
        q = math.prod(1 - p for p in fig1_population.risks)
        assert single_group_budget_estimate(fig1_population, TC75) == pytest.approx(1 + 8 * (0.75 - 0.5 * q))

    def test_perfect_test_no_risk(self):
        pop = make_population([0.0] * 6)
        assert single_group_budget_estimate(pop, TestCharacteristics(1, 1)) == 1.0


# --- properties ---------------------------------------------------------------

risks_st = st.lists(st.floats(0, 1), min_size=1, max_size=8)


@st.composite
def assays(draw):
    se = draw(st.floats(0.5, 1))
    sp = draw(st.floats(1 - se, 1))
    return TestCharacteristics(se, sp)


@given(risks_st, assays(), st.floats(0, 1))
def test_nonnegative_and_bounded(risks, tc, lam):
    m = group_metrics(group_of(sorted(risks)), tc, lam)
    assert m.expected_fn >= 0
    assert m.expected_fp >= -1e-12
    assert 1.0 - 1e-12 <= m.expected_tests <= 1 + len(risks) + 1e-12
    assert m.cost == pytest.approx(lam * m.expected_fn + (1 - lam) * m.expected_fp, abs=1e-12)


@given(risks_st)
def test_perfect_test_has_no_errors(risks):
    g = group_of(sorted(risks))
    tc = TestCharacteristics(1, 1)
    assert expected_fn_group(g, tc) == 0.0
    assert expected_fp_group(g, tc) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=200)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=4), assays())
def test_closed_forms_match_full_probability_tree(risks, tc):
    g = group_of(sorted(risks))
    fn, fp, tests = exact_group_expectations(g, tc, expand_retests=True)
    assert expected_fn_group(g, tc) == pytest.approx(fn, abs=1e-10)
    assert expected_fp_group(g, tc) == pytest.approx(fp, abs=1e-10)
    assert expected_tests_group(g, tc) == pytest.approx(tests, abs=1e-10)


@pytest.mark.parametrize(
    "risks", [[0.05], [0.3, 0.4], [0.06, 0.07, 0.08], [0.01, 0.02, 0.03, 0.04, 0.5]]
)
def test_monte_carlo_agreement(risks):
    part = partition_from_sizes(make_population(risks), [len(risks)])
    ok, report = compare_to_analytic(part, TestCharacteristics(0.7, 0.95), 100_000, seed=11)
    assert ok, report
