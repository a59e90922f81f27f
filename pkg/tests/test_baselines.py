import itertools
import math

import numpy as np
import pytest
from scipy.stats import binom

from pufr import (
    ConstraintConfig,
    GroupLabel,
    MTable,
    ScoredCandidate,
    build_query,
    compute_m_table,
    constrained_rerank,
    fastar_rerank,
    hungarian_assign,
    unfair_rank,
)

from conftest import make_query, random_query


def discounted_utility(gains_in_order):
    return sum(g / math.log2(pos + 2) for pos, g in enumerate(gains_in_order))


def exposure_fairness(neutralities_in_order):
    return sum(n / (pos + 1) for pos, n in enumerate(neutralities_in_order))


class TestUnfairRank:
    def test_sorts_by_mu(self):
        q = make_query([1.0, 3.0, 2.0], doc_ids=["A", "B", "C"])
        assert unfair_rank(q).doc_ids() == ("B", "C", "A")

    def test_single_doc(self):
        q = make_query([0.5], doc_ids=["only"])
        assert unfair_rank(q).doc_ids() == ("only",)

    def test_equal_mu_keeps_original_rank_order(self):
        q = make_query([1.0, 1.0], doc_ids=["b", "a"])  # 'a' wins the ingestion tie-break
        assert unfair_rank(q).doc_ids() == ("a", "b")


class TestMTable:
    def test_half_proportion_at_k4(self):
        table = compute_m_table(4, p=0.5, significance=0.1)
        assert table.min_protected(4) == 1
        assert binom.cdf(0, 4, 0.5) < 0.1 <= binom.cdf(1, 4, 0.5)

    def test_zero_proportion_requires_nothing(self):
        table = compute_m_table(10, p=0.0, significance=0.3)
        assert table.required == (0,) * 10

    def test_half_proportion_at_k1(self):
        table = compute_m_table(1, p=0.5, significance=0.1)
        assert table.min_protected(1) == 0

    def test_full_proportion_requires_everything(self):
        table = compute_m_table(5, p=1.0, significance=0.1)
        assert table.required == (1, 2, 3, 4, 5)

    def test_matches_binomial_quantile_oracle(self):
        rng = np.random.default_rng(83)
        for _ in range(40):
            k_max = int(rng.integers(1, 60))
            p = float(rng.random())
            significance = float(rng.uniform(0.01, 0.5))
            table = compute_m_table(k_max, p, significance)
            for k in range(1, k_max + 1):
                required = table.min_protected(k)
                assert binom.cdf(required, k, p) >= significance - 1e-12
                if required > 0:
                    assert binom.cdf(required - 1, k, p) < significance + 1e-12

    def test_required_monotone_in_k_with_unit_steps(self):
        for p in (0.2, 0.5, 0.8):
            req = compute_m_table(40, p, 0.1).required
            assert all(b - a in (0, 1) for a, b in zip(req, req[1:]))

    def test_required_monotone_in_p(self):
        tables = [compute_m_table(30, p, 0.1).required for p in (0.1, 0.3, 0.5, 0.7, 0.9)]
        for a, b in zip(tables, tables[1:]):
            assert all(x <= y for x, y in zip(a, b))

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            compute_m_table(0, 0.5, 0.1)
        with pytest.raises(ValueError):
            compute_m_table(5, 1.5, 0.1)
        with pytest.raises(ValueError):
            compute_m_table(5, 0.5, 0.0)


def fastar_feasible(order_groups, required, total_protected):
    count = 0
    for k, group in enumerate(order_groups, start=1):
        count += group is GroupLabel.PROTECTED
        if count < min(required[k - 1], total_protected):
            return False
    return True


class TestFastarRerank:
    def test_no_quota_equals_unfair(self):
        rng = np.random.default_rng(89)
        table = MTable(p=0.0, significance=0.1, required=(0,) * 30)
        for i in range(20):
            q = random_query(rng, n_min=1, n_max=20, query_id=f"q{i}")
            assert fastar_rerank(q, table).doc_ids() == unfair_rank(q).doc_ids()

    def test_quota_forces_protected_doc_first(self):
        q = make_query([2.0, 1.0], neutralities=[0.0, 1.0], doc_ids=["N", "P"])
        table = MTable(p=0.9, significance=0.1, required=(1, 1))
        assert fastar_rerank(q, table).doc_ids() == ("P", "N")

    def test_short_table_rejected(self):
        q = make_query([2.0, 1.0], neutralities=[0.0, 1.0])
        table = MTable(p=0.5, significance=0.1, required=(0,))
        with pytest.raises(ValueError, match="table"):
            fastar_rerank(q, table)

    def test_quota_beyond_pool_places_protected_first(self):
        # more protected demanded than exist: protected go as early as possible
        q = make_query([5.0, 4.0, 3.0], neutralities=[0.0, 0.0, 1.0], doc_ids=["N1", "N2", "P"])
        table = MTable(p=1.0, significance=0.1, required=(1, 2, 3))
        assert fastar_rerank(q, table).doc_ids() == ("P", "N1", "N2")

    def test_satisfies_quota_and_maximizes_utility(self):
        rng = np.random.default_rng(97)
        for i in range(150):
            q = random_query(rng, n_min=2, n_max=6, query_id=f"q{i}")
            n = len(q)
            p = float(rng.choice([0.1, 0.3, 0.5, 0.7, 0.9]))
            table = compute_m_table(n, p, 0.1)
            ranking = fastar_rerank(q, table)
            groups = {c.doc_id: c.group for c in q.candidates}
            mus = {c.doc_id: c.mu for c in q.candidates}
            total_protected = sum(
                1 for c in q.candidates if c.group is GroupLabel.PROTECTED
            )
            out_groups = [groups[d] for d in ranking.doc_ids()]
            assert fastar_feasible(out_groups, table.required, total_protected)
            # exhaustive search over feasible permutations
            best = None
            for perm in itertools.permutations(q.candidates):
                if not fastar_feasible(
                    [c.group for c in perm], table.required, total_protected
                ):
                    continue
                utility = discounted_utility([c.mu for c in perm])
                best = utility if best is None else max(best, utility)
            achieved = discounted_utility([mus[d] for d in ranking.doc_ids()])
            assert achieved == pytest.approx(best, abs=1e-9)


class TestHungarianAssign:
    def test_identity_dominant(self):
        positions = hungarian_assign(np.eye(4))
        assert list(positions) == [0, 1, 2, 3]

    def test_two_by_two_antidiagonal(self):
        positions = hungarian_assign(np.array([[1.0, 2.0], [2.0, 1.0]]))
        assert list(positions) == [1, 0]

    def test_matches_brute_force(self):
        rng = np.random.default_rng(101)
        for _ in range(40):
            n = int(rng.integers(2, 7))
            benefit = rng.normal(size=(n, n))
            positions = hungarian_assign(benefit)
            achieved = benefit[np.arange(n), positions].sum()
            best = max(
                benefit[np.arange(n), list(perm)].sum()
                for perm in itertools.permutations(range(n))
            )
            assert achieved == pytest.approx(best, abs=1e-9)

    def test_rejects_non_square(self):
        with pytest.raises(ValueError, match="square"):
            hungarian_assign(np.ones((2, 3)))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            hungarian_assign(np.array([[1.0, np.nan], [0.0, 1.0]]))


def brute_force_constrained(query, depth, floor):
    """Exhaustive search over window permutations: best feasible utility."""
    window = query.by_original_rank()[:depth]
    base = min(c.mu for c in window)
    best = None
    for perm in itertools.permutations(window):
        if exposure_fairness([c.neutrality for c in perm]) < floor - 1e-9:
            continue
        utility = discounted_utility([c.mu - base for c in perm])
        best = utility if best is None else max(best, utility)
    return best


class TestConstrainedRerank:
    def test_inactive_constraint_returns_gain_order(self):
        rng = np.random.default_rng(103)
        for i in range(15):
            q = random_query(rng, n_min=2, n_max=10, query_id=f"q{i}")
            result = constrained_rerank(q, ConstraintConfig(alpha_fairness=0.0, depth=10))
            assert result.feasible
            assert result.ranking.doc_ids() == unfair_rank(q).doc_ids()

    def test_high_floor_forces_neutral_doc_first(self):
        q = make_query([3.0, 2.0, 1.0], neutralities=[0.0, 0.0, 1.0],
                       doc_ids=["A", "B", "C"])
        result = constrained_rerank(q, ConstraintConfig(alpha_fairness=0.9, depth=3))
        assert result.feasible
        assert result.ranking.doc_ids() == ("C", "A", "B")

    def test_matches_brute_force_when_feasible(self):
        rng = np.random.default_rng(107)
        checked = 0
        for i in range(150):
            q = random_query(rng, n_min=3, n_max=7, query_id=f"q{i}")
            depth = len(q)
            alpha = float(rng.choice([0.3, 0.6, 0.8, 0.9, 0.95, 1.0]))
            result = constrained_rerank(q, ConstraintConfig(alpha_fairness=alpha, depth=depth))
            if not result.feasible:
                continue
            checked += 1
            window = q.by_original_rank()[:depth]
            base = min(c.mu for c in window)
            gains = {c.doc_id: c.mu - base for c in window}
            achieved = discounted_utility(
                [gains[d] for d in result.ranking.doc_ids()[:depth]]
            )
            best = brute_force_constrained(q, depth, result.floor)
            assert best is not None
            assert achieved == pytest.approx(best, abs=1e-9)
        assert checked > 50

    def test_infeasible_floor_is_flagged_not_raised(self):
        # the only fully neutral doc sits outside the window, so the pool
        # ideal is unreachable by any window permutation
        q = make_query([3.0, 2.0, 1.0], neutralities=[0.0, 0.0, 1.0],
                       doc_ids=["A", "B", "C"])
        result = constrained_rerank(q, ConstraintConfig(alpha_fairness=0.9, depth=2))
        assert not result.feasible
        # tail docs keep their original order after the window
        assert result.ranking.doc_ids()[2] == "C"

    def test_never_beats_unfair_utility_and_never_undercuts_its_fairness(self):
        rng = np.random.default_rng(109)
        for i in range(40):
            q = random_query(rng, n_min=3, n_max=9, query_id=f"q{i}")
            depth = len(q)
            window = q.by_original_rank()
            base = min(c.mu for c in window)
            gains = {c.doc_id: c.mu - base for c in window}
            neut = {c.doc_id: c.neutrality for c in window}
            unfair_docs = unfair_rank(q).doc_ids()
            unfair_utility = discounted_utility([gains[d] for d in unfair_docs])
            unfair_fairness = exposure_fairness([neut[d] for d in unfair_docs])
            for alpha in (0.5, 0.9):
                result = constrained_rerank(q, ConstraintConfig(alpha_fairness=alpha, depth=depth))
                docs = result.ranking.doc_ids()
                utility = discounted_utility([gains[d] for d in docs])
                fairness = exposure_fairness([neut[d] for d in docs])
                assert utility <= unfair_utility + 1e-9
                if result.feasible and fairness > unfair_fairness + 1e-9:
                    # the constraint actually moved something; fairness must
                    # not have fallen below the floor
                    assert fairness >= result.floor - 1e-9

    def test_bisection_path_fairness_monotone_in_lambda(self):
        rng = np.random.default_rng(113)
        for i in range(25):
            q = random_query(rng, n_min=4, n_max=10, query_id=f"q{i}")
            result = constrained_rerank(
                q, ConstraintConfig(alpha_fairness=0.9, depth=len(q))
            )
            path = sorted(result.steps, key=lambda s: s.lam)
            for a, b in zip(path, path[1:]):
                assert a.fairness <= b.fairness + 1e-9

    def test_tail_keeps_original_order_with_lower_scores(self):
        rng = np.random.default_rng(127)
        q = random_query(rng, n_min=8, n_max=12, query_id="q")
        depth = 4
        result = constrained_rerank(q, ConstraintConfig(alpha_fairness=0.8, depth=depth))
        docs = result.ranking.doc_ids()
        expected_tail = tuple(c.doc_id for c in q.by_original_rank()[depth:])
        assert docs[depth:] == expected_tail
        scores = [score for _, score in result.ranking.entries]
        assert scores == sorted(scores, reverse=True)
        assert max(scores[depth:], default=-math.inf) < min(scores[:depth])

    def test_supplied_gains_are_used(self):
        q = make_query([3.0, 2.0, 1.0], neutralities=[0.5, 0.5, 0.5],
                       doc_ids=["A", "B", "C"])
        gains = {"A": 0.0, "B": 1.0, "C": 2.0}
        result = constrained_rerank(
            q, ConstraintConfig(alpha_fairness=0.0, depth=3), gains=gains
        )
        assert result.ranking.doc_ids() == ("C", "B", "A")

    def test_missing_gain_rejected(self):
        q = make_query([3.0, 2.0], neutralities=[0.5, 0.5], doc_ids=["A", "B"])
        with pytest.raises(ValueError, match="gain"):
            constrained_rerank(q, ConstraintConfig(alpha_fairness=0.0, depth=2), gains={"A": 1.0})

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ConstraintConfig(alpha_fairness=1.5)
        with pytest.raises(ValueError):
            ConstraintConfig(alpha_fairness=0.5, depth=0)
