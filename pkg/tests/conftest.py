"""Shared builders for test corpora."""

from __future__ import annotations

import numpy as np

from pufr import GroupLabel, QueryCandidates, ScoredCandidate, assign_groups, build_query


def make_query(
    mus,
    sigmas=None,
    neutralities=None,
    query_id: str = "q",
    doc_ids=None,
) -> QueryCandidates:
    """Compact query builder; groups are assigned from neutrality == 1."""
    n = len(mus)
    sigmas = sigmas if sigmas is not None else [0.0] * n
    neutralities = neutralities if neutralities is not None else [0.0] * n
    doc_ids = doc_ids if doc_ids is not None else [f"d{i + 1}" for i in range(n)]
    candidates = [
        ScoredCandidate(
            doc_id=doc_ids[i], mu=float(mus[i]), sigma=float(sigmas[i]),
            neutrality=float(neutralities[i]),
        )
        for i in range(n)
    ]
    return assign_groups(build_query(query_id, candidates))


def random_query(
    rng: np.random.Generator,
    n_min: int = 2,
    n_max: int = 12,
    query_id: str = "q",
    protected_fraction: float = 0.5,
) -> QueryCandidates:
    n = int(rng.integers(n_min, n_max + 1))
    mus = rng.normal(0.0, 2.0, n)
    sigmas = np.abs(rng.normal(0.5, 0.3, n))
    protected = rng.random(n) < protected_fraction
    neutralities = np.where(protected, 1.0, rng.random(n) * 0.95)
    return make_query(mus, sigmas, neutralities, query_id=query_id)


def groups_of(query: QueryCandidates) -> dict[str, GroupLabel]:
    return {c.doc_id: c.group for c in query.candidates}
