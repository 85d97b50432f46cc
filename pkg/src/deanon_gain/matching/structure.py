"""Star shortcut and l-indistinguishability."""

from __future__ import annotations

import math

import numpy as np

from ..graph import Graph, Query
from ..knowledge import KnowledgeSpec
from .backtrack import count_matches, has_match


def star_match_count(g: Graph, d_c: int) -> int:
    """Ordered non-induced matches of a star with ``d_c`` leaves: a center of
    degree at least ``d_c`` and an ordered choice of ``d_c`` of its neighbours."""
    if d_c < 1:
        raise ValueError("a star needs at least one leaf")
    return sum(math.perm(int(d), d_c) for d in g.degrees() if d >= d_c)


def star_query(d_c: int) -> Query:
    return Query(d_c + 1, [(0, i) for i in range(1, d_c + 1)])


def disjoint_copies(q: Query, ell: int) -> Query:
    """``ell`` node-disjoint copies of ``q`` as one (disconnected) query."""
    k = q.n
    edges = [(u + c * k, v + c * k) for c in range(ell) for u, v in q.edges]
    attrs = None if q.attributes is None else np.tile(q.attributes, (ell, 1))
    beliefs = None
    if q.beliefs is not None:
        from ..graph import AttributeBelief

        beliefs = AttributeBelief([[d for d in node] for _ in range(ell) for node in q.beliefs.dists])
    return Query(k * ell, edges, attributes=attrs, schema=q.schema, beliefs=beliefs, require_connected=False)


def ell_indistinguishability(
    g: Graph,
    q: Query,
    ell: int,
    mode: str = "weak",
    sem: KnowledgeSpec = KnowledgeSpec(),
    budget: int | None = None,
) -> bool:
    """Weak: at least ``ell`` matches of ``q``. Strong: ``ell`` matches whose
    images are pairwise disjoint, i.e. one match of ``ell`` disjoint copies."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if mode == "weak":
        res = count_matches(g, q, sem, budget=budget, collect_communities=False, limit=ell)
        return res.match_count >= ell
    if mode == "strong":
        if q.n * ell > g.n:
            return False
        return has_match(g, disjoint_copies(q, ell), sem, budget=budget)
    raise ValueError(f"mode must be 'weak' or 'strong', not {mode!r}")
