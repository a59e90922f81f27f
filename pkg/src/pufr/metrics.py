"""Evaluation: nDCG@k, rank-discounted neutrality (FaiRR/nFaiRR), paired
t-tests, and uncertainty-interval intersection counts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from scipy import stats

from .core import QueryCandidates, Ranking


@dataclass(frozen=True)
class RelevanceJudgments:
    """Graded relevance per (query, doc); missing pairs count as grade 0."""

    grades: Mapping[tuple[str, str], int]

    def __post_init__(self) -> None:
        for (query_id, doc_id), grade in self.grades.items():
            if grade < 0:
                raise ValueError(
                    f"negative relevance grade {grade} for ({query_id!r}, {doc_id!r})"
                )

    def grade(self, query_id: str, doc_id: str) -> int:
        return self.grades.get((query_id, doc_id), 0)

    def grades_for_query(self, query_id: str) -> list[int]:
        return [g for (qid, _), g in self.grades.items() if qid == query_id]


@dataclass(frozen=True)
class MetricReport:
    """Per-query metric values plus their arithmetic mean."""

    per_query: Mapping[str, float]
    mean: float

    @classmethod
    def from_values(cls, per_query: Mapping[str, float]) -> "MetricReport":
        if not per_query:
            raise ValueError("metric report needs at least one query")
        return cls(per_query=dict(per_query), mean=sum(per_query.values()) / len(per_query))


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    degrees_of_freedom: int
    p_value: float


def _discount(position: int) -> float:
    return math.log2(position + 1)


def ndcg_at_k(ranking: Ranking, judgments: RelevanceJudgments, k: int) -> float:
    """Normalized discounted cumulative gain at cutoff k (linear gains).

    The ideal ranking sorts the query's judged grades descending; when no
    positive judgments exist the metric is 0 by convention.
    """
    if k < 1:
        raise ValueError(f"cutoff k must be >= 1, got {k}")
    dcg = 0.0
    for position, (doc_id, _) in enumerate(ranking.entries[:k], start=1):
        dcg += judgments.grade(ranking.query_id, doc_id) / _discount(position)
    ideal_grades = sorted(judgments.grades_for_query(ranking.query_id), reverse=True)
    idcg = sum(
        grade / _discount(position)
        for position, grade in enumerate(ideal_grades[:k], start=1)
    )
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


def fairr_at_k(ranking: Ranking, neutrality: Mapping[str, float], k: int) -> float:
    """Rank-discounted neutrality mass of the top-k: sum of n_d / rank."""
    if k < 1:
        raise ValueError(f"cutoff k must be >= 1, got {k}")
    total = 0.0
    for rank, (doc_id, _) in enumerate(ranking.entries[:k], start=1):
        if doc_id not in neutrality:
            raise ValueError(f"no neutrality score for ranked doc {doc_id!r}")
        total += neutrality[doc_id] / rank
    return total


def ideal_fairr_at_k(query: QueryCandidates, k: int) -> float:
    """Best FaiRR@k attainable from the query's candidate pool.

    Ordering candidates by neutrality descending maximizes the sum since
    1/rank is decreasing (rearrangement inequality).
    """
    if k < 1:
        raise ValueError(f"cutoff k must be >= 1, got {k}")
    values = sorted(query.neutrality_by_doc().values(), reverse=True)
    return sum(value / rank for rank, value in enumerate(values[:k], start=1))


def nfairr_at_k(ranking: Ranking, query: QueryCandidates, k: int) -> float:
    """FaiRR@k normalized by the pool's ideal; 1 when the ideal is 0
    (an all-biased pool cannot be improved)."""
    ideal = ideal_fairr_at_k(query, k)
    if ideal == 0.0:
        return 1.0
    return fairr_at_k(ranking, query.neutrality_by_doc(), k) / ideal


def paired_t_test(a: Mapping[str, float], b: Mapping[str, float]) -> TTestResult:
    """Two-tailed paired t-test over per-query values.

    Conventions for degenerate inputs: all differences zero gives
    (t=0, p=1); zero variance with nonzero mean gives p=0.
    """
    if set(a) != set(b):
        only_a = sorted(set(a) - set(b))
        only_b = sorted(set(b) - set(a))
        raise ValueError(f"query sets differ (only in a: {only_a}, only in b: {only_b})")
    if len(a) < 2:
        raise ValueError("paired t-test needs at least 2 queries")
    keys = sorted(a)
    diffs = [a[key] - b[key] for key in keys]
    n = len(diffs)
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    sd = math.sqrt(var)
    df = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(t_statistic=0.0, degrees_of_freedom=df, p_value=1.0)
        return TTestResult(
            t_statistic=math.copysign(math.inf, mean), degrees_of_freedom=df, p_value=0.0
        )
    t = mean / (sd / math.sqrt(n))
    p = 2.0 * float(stats.t.sf(abs(t), df))
    return TTestResult(t_statistic=t, degrees_of_freedom=df, p_value=p)


def intersection_counts(query: QueryCandidates, alpha: float) -> list[int]:
    """Per rank position, how many other docs' score intervals
    [mu - alpha*sigma, mu + alpha*sigma] overlap that doc's interval.

    Overlap is closed-interval (touching endpoints count); a document is
    never counted against itself.
    """
    if not (math.isfinite(alpha) and alpha > 0.0):
        raise ValueError(f"alpha must be > 0, got {alpha!r}")
    docs = query.by_original_rank()
    bounds = []
    for c in docs:
        if c.sigma is None:
            raise ValueError(
                f"query {query.query_id!r}: candidate {c.doc_id!r} has no sigma"
            )
        bounds.append((c.mu - alpha * c.sigma, c.mu + alpha * c.sigma))
    counts = []
    for i, (lo_i, hi_i) in enumerate(bounds):
        overlapping = sum(
            1
            for j, (lo_j, hi_j) in enumerate(bounds)
            if j != i and max(lo_i, lo_j) <= min(hi_i, hi_j)
        )
        counts.append(overlapping)
    return counts


def median_intersections(corpus: Iterable[QueryCandidates], alpha: float) -> list[int]:
    """Median of intersection counts per rank position across queries.

    Only queries deep enough to populate a rank contribute to its median;
    even-sized samples take the lower-mid element so the output stays
    integer-valued.
    """
    per_query = [intersection_counts(query, alpha) for query in corpus]
    if not per_query:
        raise ValueError("corpus is empty")
    max_depth = max(len(counts) for counts in per_query)
    medians = []
    for rank_idx in range(max_depth):
        values = sorted(counts[rank_idx] for counts in per_query if len(counts) > rank_idx)
        medians.append(values[(len(values) - 1) // 2])
    return medians
